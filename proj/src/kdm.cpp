#include "kdm/kdm.hpp"

#include <cmath>

namespace kdm {

namespace {

constexpr double kWeightNegTol = 1e-12;

Eigen::VectorXd normalize_weights(Eigen::VectorXd w) {
  if (w.size() == 0) {
    throw Error(ErrorCode::bad_weights, "weight vector is empty");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) {
      throw Error(ErrorCode::bad_weights, "non-finite weight");
    }
    if (w[i] < -kWeightNegTol) {
      throw Error(ErrorCode::bad_weights,
                  "negative weight " + std::to_string(w[i]) + " at index " +
                      std::to_string(i));
    }
    if (w[i] < 0.0) w[i] = 0.0;
    sum += w[i];
  }
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::bad_weights, "weights sum to zero");
  }
  return w / sum;
}

void check_components_valid(const Eigen::MatrixXd& c, const KernelSpec& k) {
  if (c.rows() < 1) {
    throw Error(ErrorCode::bad_weights, "a KDM needs at least one component");
  }
  if (c.cols() != k.dim()) {
    throw Error(ErrorCode::dim_mismatch,
                "components have dim " + std::to_string(c.cols()) +
                    ", kernel expects " + std::to_string(k.dim()));
  }
  // Cosine components must have a direction; product kernels check factors.
  if (k.is_cosine()) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      detail::squared_norm_checked(c.row(i).transpose());
    }
  } else if (k.is_product()) {
    int nx = k.factor_x().dim();
    check_components_valid(c.leftCols(nx), k.factor_x());
    check_components_valid(c.rightCols(c.cols() - nx), k.factor_y());
  }
}

}  // namespace

KernelDensityMatrix::KernelDensityMatrix(Eigen::MatrixXd components,
                                         Eigen::VectorXd weights, KernelSpec kernel)
    : components_(std::move(components)),
      weights_(normalize_weights(std::move(weights))),
      kernel_(std::move(kernel)) {
  if (weights_.size() != components_.rows()) {
    throw Error(ErrorCode::shape_mismatch,
                "weight count does not match component count");
  }
  check_components_valid(components_, kernel_);
}

JointKDM::JointKDM(Eigen::MatrixXd x_components, Eigen::MatrixXd y_components,
                   Eigen::VectorXd weights, KernelSpec x_kernel, KernelSpec y_kernel)
    : x_components_(std::move(x_components)),
      y_components_(std::move(y_components)),
      weights_(normalize_weights(std::move(weights))),
      x_kernel_(std::move(x_kernel)),
      y_kernel_(std::move(y_kernel)) {
  if (x_components_.rows() != y_components_.rows()) {
    throw Error(ErrorCode::shape_mismatch,
                "x and y component counts differ (paired samples required)");
  }
  if (weights_.size() != x_components_.rows()) {
    throw Error(ErrorCode::shape_mismatch,
                "weight count does not match component count");
  }
  check_components_valid(x_components_, x_kernel_);
  check_components_valid(y_components_, y_kernel_);
}

KernelDensityMatrix make_kdm(Eigen::MatrixXd components, Eigen::VectorXd weights,
                             KernelSpec kernel) {
  return KernelDensityMatrix(std::move(components), std::move(weights),
                             std::move(kernel));
}

JointKDM make_joint(Eigen::MatrixXd x_components, Eigen::MatrixXd y_components,
                    Eigen::VectorXd weights, KernelSpec x_kernel,
                    KernelSpec y_kernel) {
  return JointKDM(std::move(x_components), std::move(y_components),
                  std::move(weights), std::move(x_kernel), std::move(y_kernel));
}

double project(const KernelDensityMatrix& rho,
               const Eigen::Ref<const Eigen::VectorXd>& x) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rho.num_components(); ++i) {
    acc += rho.weights()[i] *
           eval_sq(rho.kernel(), x, rho.components().row(i).transpose());
  }
  return acc;
}

double density(const KernelDensityMatrix& rho,
               const Eigen::Ref<const Eigen::VectorXd>& x) {
  return norm_const(rho.kernel()) * project(rho, x);
}

Eigen::VectorXd density_many(const KernelDensityMatrix& rho,
                             const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd g = gram_sq(rho.kernel(), X, rho.components());
  return norm_const(rho.kernel()) * (g * rho.weights());
}

double log_likelihood(const KernelDensityMatrix& rho,
                      const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.rows() < 1) {
    throw Error(ErrorCode::empty_dataset, "log_likelihood over an empty matrix");
  }
  Eigen::VectorXd dens = density_many(rho, X);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < dens.size(); ++i) {
    acc += std::log(dens[i] + kLogLikelihoodEps);
  }
  return acc;
}

Eigen::VectorXd categorical_pmf(const KernelDensityMatrix& rho) {
  if (!rho.kernel().is_cosine()) {
    throw Error(ErrorCode::wrong_kernel_kind,
                "categorical_pmf requires a cosine-kernel KDM");
  }
  Eigen::VectorXd pmf = Eigen::VectorXd::Zero(rho.dim());
  for (Eigen::Index i = 0; i < rho.num_components(); ++i) {
    double n2 = detail::squared_norm_checked(rho.components().row(i).transpose());
    pmf += (rho.weights()[i] / n2) *
           rho.components().row(i).array().square().matrix().transpose();
  }
  return pmf;
}

KernelDensityMatrix marginal(const JointKDM& joint, Side keep) {
  if (keep == Side::x) {
    return KernelDensityMatrix(joint.x_components(), joint.weights(),
                               joint.x_kernel());
  }
  return KernelDensityMatrix(joint.y_components(), joint.weights(),
                             joint.y_kernel());
}

double joint_density(const JointKDM& joint, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < joint.num_components(); ++i) {
    acc += joint.weights()[i] *
           eval_sq(joint.x_kernel(), x, joint.x_components().row(i).transpose()) *
           eval_sq(joint.y_kernel(), y, joint.y_components().row(i).transpose());
  }
  return norm_const(joint.x_kernel()) * norm_const(joint.y_kernel()) * acc;
}

KernelDensityMatrix to_flat_kdm(const JointKDM& joint) {
  Eigen::MatrixXd flat(joint.num_components(), joint.x_dim() + joint.y_dim());
  flat << joint.x_components(), joint.y_components();
  return KernelDensityMatrix(
      std::move(flat), joint.weights(),
      KernelSpec::product(joint.x_kernel(), joint.y_kernel()));
}

JointKDM joint_from_flat(const KernelDensityMatrix& flat) {
  if (!flat.kernel().is_product()) {
    throw Error(ErrorCode::wrong_kernel_kind,
                "joint_from_flat requires a product-kernel KDM");
  }
  int nx = flat.kernel().factor_x().dim();
  return JointKDM(flat.components().leftCols(nx),
                  flat.components().rightCols(flat.dim() - nx), flat.weights(),
                  flat.kernel().factor_x(), flat.kernel().factor_y());
}

}  // namespace kdm
