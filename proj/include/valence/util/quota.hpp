#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace valence {

/// Integer allocation of `total` items across groups by the largest-remainder
/// method: each group receives floor(target) or ceil(target) when capacity
/// allows, never more than its cap. Ties go to the lower group index.
std::vector<std::size_t> allocate_quota(std::span<const double> targets,
                                        std::span<const std::size_t> caps, std::size_t total);

}  // namespace valence
