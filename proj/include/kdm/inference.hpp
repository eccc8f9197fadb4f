#pragma once

#include "kdm/kdm.hpp"

namespace kdm {

/// Denominators below this are treated as total kernel underflow: the
/// affected input component falls back to the joint's prior weights.
constexpr double kDegenerateDenominator = 1e-300;

struct InferenceResult {
  KernelDensityMatrix output;
  /// Per-input-component conditional weights (m x m'); each row sums to 1.
  /// Diagnostic surface, not part of the serialized model.
  Eigen::MatrixXd responsibilities;
};

/// Single-sample input distribution: one component, weight 1.
KernelDensityMatrix point_kdm(const Eigen::Ref<const Eigen::VectorXd>& x,
                              const KernelSpec& k);

/// Maps an input KDM through a joint KDM to the output-side KDM:
/// p''_i = sum_l p_l * p'_i k^2(x_l, x'_i) / sum_j p'_j k^2(x_l, x'_j).
/// Requires rho_x's kernel to structurally match the joint's x kernel.
InferenceResult infer(const KernelDensityMatrix& rho_x, const JointKDM& joint);

/// Output mixture weights for a batch of single-point queries, one row per
/// query. Deterministic; parallelizes across queries.
Eigen::MatrixXd infer_weights_batch(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                    const JointKDM& joint);

/// Swaps the x and y sides; weights unchanged. Involution.
JointKDM reverse(const JointKDM& joint);

/// Mixture mean of an inferred output: sum_i p''_i y'_i. RBF outputs only.
Eigen::VectorXd predict_mean(const InferenceResult& result);

/// Conditional density f(y | x0) of the joint at y given the x-side point x0.
/// Integrates (rbf y) or sums over the canonical basis (cosine y) to 1.
double conditional_density(const JointKDM& joint,
                           const Eigen::Ref<const Eigen::VectorXd>& x0,
                           const Eigen::Ref<const Eigen::VectorXd>& y);

}  // namespace kdm
