#include "kdm/inference.hpp"

namespace kdm {

namespace {

void check_input_kernel(const KernelSpec& input, const KernelSpec& joint_x) {
  if (!structurally_equal(input, joint_x)) {
    throw Error(ErrorCode::kernel_mismatch,
                "input KDM kernel does not match the joint's x kernel");
  }
}

/// Responsibility rows for input components given the x-side Gram block
/// (rows: input components, cols: joint components). A row whose
/// denominator underflows falls back to the prior p'.
Eigen::MatrixXd responsibilities_from_gram(const Eigen::MatrixXd& gram,
                                           const Eigen::VectorXd& prior) {
  Eigen::MatrixXd resp(gram.rows(), gram.cols());
#pragma omp parallel for schedule(static) if (gram.rows() * gram.cols() > 4096)
  for (Eigen::Index l = 0; l < gram.rows(); ++l) {
    Eigen::RowVectorXd row = gram.row(l).cwiseProduct(prior.transpose());
    double denom = row.sum();
    if (denom < kDegenerateDenominator) {
      resp.row(l) = prior.transpose();
    } else {
      resp.row(l) = row / denom;
    }
  }
  return resp;
}

}  // namespace

KernelDensityMatrix point_kdm(const Eigen::Ref<const Eigen::VectorXd>& x,
                              const KernelSpec& k) {
  Eigen::MatrixXd c = x.transpose();
  return KernelDensityMatrix(std::move(c), Eigen::VectorXd::Ones(1), k);
}

InferenceResult infer(const KernelDensityMatrix& rho_x, const JointKDM& joint) {
  check_input_kernel(rho_x.kernel(), joint.x_kernel());
  Eigen::MatrixXd gram =
      gram_sq(joint.x_kernel(), rho_x.components(), joint.x_components());
  Eigen::MatrixXd resp = responsibilities_from_gram(gram, joint.weights());
  Eigen::VectorXd out_weights = resp.transpose() * rho_x.weights();
  return InferenceResult{
      KernelDensityMatrix(joint.y_components(), std::move(out_weights),
                          joint.y_kernel()),
      std::move(resp)};
}

Eigen::MatrixXd infer_weights_batch(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                    const JointKDM& joint) {
  Eigen::MatrixXd gram = gram_sq(joint.x_kernel(), queries, joint.x_components());
  // For single-point inputs the output weights are the responsibility rows.
  return responsibilities_from_gram(gram, joint.weights());
}

JointKDM reverse(const JointKDM& joint) {
  return JointKDM(joint.y_components(), joint.x_components(), joint.weights(),
                  joint.y_kernel(), joint.x_kernel());
}

Eigen::VectorXd predict_mean(const InferenceResult& result) {
  if (!result.output.kernel().is_rbf()) {
    throw Error(ErrorCode::wrong_kernel_kind,
                "predict_mean expects an rbf output kernel");
  }
  return result.output.components().transpose() * result.output.weights();
}

double conditional_density(const JointKDM& joint,
                           const Eigen::Ref<const Eigen::VectorXd>& x0,
                           const Eigen::Ref<const Eigen::VectorXd>& y) {
  // f(y | x0) = f_joint(x0, y) / (M_x * sum_j p'_j k_x^2(x0, x'_j)).
  Eigen::VectorXd kx(joint.num_components());
  for (Eigen::Index j = 0; j < joint.num_components(); ++j) {
    kx[j] = eval_sq(joint.x_kernel(), x0, joint.x_components().row(j).transpose());
  }
  double denom = kx.dot(joint.weights());
  if (denom < kDegenerateDenominator) {
    // Prior fallback, consistent with infer: the conditional collapses to
    // the marginal over y.
    return density(marginal(joint, Side::y), y);
  }
  double num = 0.0;
  for (Eigen::Index j = 0; j < joint.num_components(); ++j) {
    num += joint.weights()[j] * kx[j] *
           eval_sq(joint.y_kernel(), y, joint.y_components().row(j).transpose());
  }
  return norm_const(joint.y_kernel()) * num / denom;
}

}  // namespace kdm
