#pragma once

#include <cstdint>

#include "geolearn/features.hpp"

namespace geolearn::harness {

/// Independent random streams derived from one master seed. Every consumer
/// draws seed = mix_seed(mix_seed(master, stream), index), so a given
/// instance or fold sees the same randomness regardless of which sweep point
/// or worker asks for it.
enum class Stream : std::uint64_t {
  instances = 1,
  shadows = 2,
  split = 3,
  folds = 4,
  solver = 5,
  rff = 6,
  noise = 7,
  probe = 8,
  observables = 9,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return mix_seed(mix_seed(master, static_cast<std::uint64_t>(stream)), index);
}

}  // namespace geolearn::harness
