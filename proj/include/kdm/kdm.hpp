#pragma once

#include <Eigen/Core>

#include "kdm/kernels.hpp"

namespace kdm {

/// The central value type: a mixture (components, simplex weights, kernel)
/// representing a probability distribution through the squared-kernel
/// projection function. Immutable after construction.
class KernelDensityMatrix {
 public:
  KernelDensityMatrix(Eigen::MatrixXd components, Eigen::VectorXd weights,
                      KernelSpec kernel);

  const Eigen::MatrixXd& components() const noexcept { return components_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }

  Eigen::Index num_components() const noexcept { return components_.rows(); }
  Eigen::Index dim() const noexcept { return components_.cols(); }

 private:
  Eigen::MatrixXd components_;
  Eigen::VectorXd weights_;
  KernelSpec kernel_;
};

/// A KDM over paired (x, y) samples with a tensor-product kernel, stored
/// factored so inference can form x-side Gram matrices alone.
class JointKDM {
 public:
  JointKDM(Eigen::MatrixXd x_components, Eigen::MatrixXd y_components,
           Eigen::VectorXd weights, KernelSpec x_kernel, KernelSpec y_kernel);

  const Eigen::MatrixXd& x_components() const noexcept { return x_components_; }
  const Eigen::MatrixXd& y_components() const noexcept { return y_components_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  const KernelSpec& x_kernel() const noexcept { return x_kernel_; }
  const KernelSpec& y_kernel() const noexcept { return y_kernel_; }

  Eigen::Index num_components() const noexcept { return weights_.size(); }
  Eigen::Index x_dim() const noexcept { return x_components_.cols(); }
  Eigen::Index y_dim() const noexcept { return y_components_.cols(); }

 private:
  Eigen::MatrixXd x_components_, y_components_;
  Eigen::VectorXd weights_;
  KernelSpec x_kernel_, y_kernel_;
};

enum class Side { x, y };

/// Validates shapes and weights, clamps tiny negatives, renormalizes the
/// weight vector onto the simplex. Throws BadWeights for entries below
/// -1e-12 or a nonpositive sum.
KernelDensityMatrix make_kdm(Eigen::MatrixXd components, Eigen::VectorXd weights,
                             KernelSpec kernel);

JointKDM make_joint(Eigen::MatrixXd x_components, Eigen::MatrixXd y_components,
                    Eigen::VectorXd weights, KernelSpec x_kernel,
                    KernelSpec y_kernel);

/// Projection function: sum_i p_i k^2(x, x_i). In [0, 1].
double project(const KernelDensityMatrix& rho,
               const Eigen::Ref<const Eigen::VectorXd>& x);

/// Probability density (or mass): norm_const(kernel) * project(rho, x).
double density(const KernelDensityMatrix& rho,
               const Eigen::Ref<const Eigen::VectorXd>& x);

/// Batched density over query rows; deterministic, parallelizes internally.
Eigen::VectorXd density_many(const KernelDensityMatrix& rho,
                             const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Guard added inside the log so kernel underflow cannot produce -inf.
constexpr double kLogLikelihoodEps = 1e-30;

/// sum_i log(density(rho, X_i) + eps).
double log_likelihood(const KernelDensityMatrix& rho,
                      const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Categorical PMF encoded by a cosine KDM: pi_j = sum_i p_i (c_hat_ij)^2
/// with row-normalized components. Equals density at each canonical basis
/// vector; sums to 1.
Eigen::VectorXd categorical_pmf(const KernelDensityMatrix& rho);

/// Marginal of a joint KDM: the kept side's components and kernel, same weights.
KernelDensityMatrix marginal(const JointKDM& joint, Side keep);

/// Joint density at a pair (x, y).
double joint_density(const JointKDM& joint, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y);

/// The equivalent flat representation: concatenated (x, y) rows with a
/// product kernel. Round-trips through joint_from_flat.
KernelDensityMatrix to_flat_kdm(const JointKDM& joint);

/// Inverse of to_flat_kdm; requires a product kernel.
JointKDM joint_from_flat(const KernelDensityMatrix& flat);

}  // namespace kdm
