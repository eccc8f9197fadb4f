#pragma once

#include "kdm/kdm.hpp"

namespace kdm::reference {

/// Serial reference implementations mirroring the parallel kernels entry by
/// entry. Tests compare the fast paths against these; the benchmark target
/// times both. Deliberately plain loops; keep them that way.

Eigen::MatrixXd gram_sq(const KernelSpec& k, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& Y);

/// Direct two-loop evaluation of the inference weight formula
/// p''_i = sum_l p_l p'_i k^2(x_l, x'_i) / sum_j p'_j k^2(x_l, x'_j),
/// with the same prior fallback for underflowed denominators.
Eigen::VectorXd infer_weights(const KernelDensityMatrix& rho_x,
                              const JointKDM& joint);

/// Hand loop over the projection sum.
double density(const KernelDensityMatrix& rho, const Eigen::VectorXd& x);

/// Per-query densities via the serial path.
Eigen::VectorXd density_many(const KernelDensityMatrix& rho,
                             const Eigen::MatrixXd& X);

}  // namespace kdm::reference
