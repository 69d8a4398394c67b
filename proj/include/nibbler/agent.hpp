#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include "nibbler/multicatch.hpp"

namespace nibbler {

/// A continuing-control learner driven one transition at a time.
class Agent {
 public:
  virtual ~Agent() = default;

  /// Receives R_{t+1} and O_{t+1}, learns from the cached transition and
  /// returns A_{t+1}. The first call only caches (its reward is ignored).
  virtual int step(double reward, const BitObservation& observation) = 0;

  virtual std::string name() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual bool all_finite() const = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

}  // namespace nibbler
