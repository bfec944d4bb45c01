#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/random.hpp"

namespace pplcheck {

struct FewShotSplit {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<std::size_t> shot_positions;  // permutation order
  std::vector<std::size_t> test_positions;  // dataset order
  std::vector<std::string> shot_ids;
  std::vector<std::string> test_ids;

  bool operator==(const FewShotSplit&) const = default;
};

// Seeded permutation of the dataset (splitmix64 + Fisher-Yates); the first n
// positions are shots. With `stratified` and n >= 2, a single-class shot set
// has its last shot swapped for the first later record of the missing class.
inline FewShotSplit make_split(const Dataset& ds, std::size_t n, std::uint64_t seed, bool stratified = false) {
  if (n < 1 || n >= ds.size()) {
    fail(ErrorKind::Validation, "shot count must satisfy 1 <= n < " + std::to_string(ds.size()) + ", got " +
                                    std::to_string(n));
  }
  auto perm = seeded_permutation(ds.size(), seed);

  if (stratified && n >= 2) {
    const Label first = ds[perm[0]].label;
    bool mixed = false;
    for (std::size_t i = 1; i < n && !mixed; ++i) mixed = ds[perm[i]].label != first;
    if (!mixed) {
      for (std::size_t i = n; i < perm.size(); ++i) {
        if (ds[perm[i]].label != first) {
          std::swap(perm[n - 1], perm[i]);
          break;
        }
      }
    }
  }

  FewShotSplit split;
  split.seed = seed;
  split.n = n;
  split.shot_positions.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<bool> is_shot(ds.size(), false);
  for (auto p : split.shot_positions) {
    is_shot[p] = true;
    split.shot_ids.push_back(ds[p].id);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (is_shot[i]) continue;
    split.test_positions.push_back(i);
    split.test_ids.push_back(ds[i].id);
  }
  return split;
}

}  // namespace pplcheck
