#include "valence/util/quota.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace valence {

std::vector<std::size_t> allocate_quota(std::span<const double> targets,
                                        std::span<const std::size_t> caps, std::size_t total) {
  const std::size_t g = targets.size();
  std::vector<std::size_t> quota(g, 0);
  std::vector<double> frac(g, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const double t = std::max(0.0, targets[i]);
    quota[i] = std::min(caps[i], static_cast<std::size_t>(std::floor(t)));
    frac[i] = t - std::floor(t);
    assigned += quota[i];
  }
  // Over-allocation can only come from floors summing past `total`; trim the
  // groups with the smallest remainders first.
  std::vector<std::size_t> order(g);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (assigned > total) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] < frac[b]; });
    for (std::size_t k = 0; assigned > total; k = (k + 1) % g) {
      if (quota[order[k]] > 0) {
        --quota[order[k]];
        --assigned;
      }
    }
    return quota;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i : order) {
    if (assigned == total) break;
    if (quota[i] < caps[i] && frac[i] > 0.0) {
      ++quota[i];
      ++assigned;
    }
  }
  // Caps may still leave a shortfall; fill any group with spare capacity.
  for (std::size_t i : order) {
    while (assigned < total && quota[i] < caps[i]) {
      ++quota[i];
      ++assigned;
    }
  }
  return quota;
}

}  // namespace valence
