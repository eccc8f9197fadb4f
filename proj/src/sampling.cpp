#include "kdm/sampling.hpp"

#include <cmath>

namespace kdm {

Eigen::MatrixXd sample_continuous(const KernelDensityMatrix& rho,
                                  Eigen::Index n_samples, RngState& rng) {
  if (!rho.kernel().is_rbf()) {
    throw Error(ErrorCode::wrong_kernel_kind, "sample_continuous needs an rbf KDM");
  }
  const double std_dev = rho.kernel().sigma() / std::numbers::sqrt2;
  Eigen::MatrixXd out(n_samples, rho.dim());
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    Eigen::Index comp = rng.next_categorical(rho.weights());
    for (Eigen::Index d = 0; d < rho.dim(); ++d) {
      out(s, d) = rho.components()(comp, d) + std_dev * rng.next_gaussian();
    }
  }
  return out;
}

std::vector<Eigen::Index> sample_discrete(const KernelDensityMatrix& rho,
                                          Eigen::Index n_samples, RngState& rng) {
  if (!rho.kernel().is_cosine()) {
    throw Error(ErrorCode::wrong_kernel_kind, "sample_discrete needs a cosine KDM");
  }
  Eigen::VectorXd pmf = categorical_pmf(rho);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n_samples));
  for (auto& idx : out) {
    idx = rng.next_categorical(pmf);
  }
  return out;
}

}  // namespace kdm
