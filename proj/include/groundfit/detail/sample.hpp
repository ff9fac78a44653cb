#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace groundfit::detail {

/// Deterministic uniform subsample of {0..n-1} of size k (k <= n), returned
/// ascending. Partial Fisher-Yates on an index array.
inline std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k,
                                                  std::mt19937& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace groundfit::detail
