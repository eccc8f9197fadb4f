#pragma once

#include "kdm/kdm.hpp"
#include "kdm/rng.hpp"

namespace kdm {

/// Ancestral sampling from an rbf KDM: draw a component index from the
/// weights, then a Gaussian around that component with covariance
/// (sigma^2 / 2) * I (the kernel convention's component covariance).
/// Returns n_samples x dim.
Eigen::MatrixXd sample_continuous(const KernelDensityMatrix& rho,
                                  Eigen::Index n_samples, RngState& rng);

/// Categorical sampling from a cosine KDM: indices follow categorical_pmf.
std::vector<Eigen::Index> sample_discrete(const KernelDensityMatrix& rho,
                                          Eigen::Index n_samples, RngState& rng);

}  // namespace kdm
