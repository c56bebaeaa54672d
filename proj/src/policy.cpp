#include "opera/policy.hpp"

#include <cmath>
#include <string>

#include "opera/errors.hpp"

namespace opera {

void TabularPolicy::validate() const {
  if (probs_.empty()) throw ConfigError("policy must cover at least one observation");
  const std::size_t width = probs_[0].size();
  if (width == 0) throw ConfigError("policy must cover at least one action");
  for (std::size_t o = 0; o < probs_.size(); ++o) {
    if (probs_[o].size() != width)
      throw ConfigError("policy row " + std::to_string(o) + ": ragged action dimension");
    double sum = 0.0;
    for (double p : probs_[o]) {
      if (p < 0.0) throw ConfigError("policy row " + std::to_string(o) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("policy row " + std::to_string(o) + ": probabilities sum to " +
                        std::to_string(sum) + ", expected 1");
  }
}

}  // namespace opera
