#include "kdm/rng.hpp"

#include <numeric>

namespace kdm {

std::vector<Eigen::Index> RngState::sample_without_replacement(Eigen::Index n,
                                                               Eigen::Index count) {
  if (count > n) {
    throw Error(ErrorCode::bad_config,
                "cannot sample " + std::to_string(count) + " of " +
                    std::to_string(n) + " without replacement");
  }
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < count; ++i) {
    Eigen::Index j = i + static_cast<Eigen::Index>(next_below(
                             static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

std::vector<Eigen::Index> RngState::sample_with_replacement(Eigen::Index n,
                                                            Eigen::Index count) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(count));
  for (auto& idx : out) {
    idx = static_cast<Eigen::Index>(next_below(static_cast<std::uint64_t>(n)));
  }
  return out;
}

}  // namespace kdm
