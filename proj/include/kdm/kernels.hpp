#pragma once

#include <memory>
#include <string>

#include <Eigen/Core>

#include "kdm/errors.hpp"

namespace kdm {

enum class KernelKind { cosine, rbf, product };

/// Immutable description of a unit-diagonal positive-definite kernel.
///
/// RBF convention used throughout: k(x, y) = exp(-||x - y||^2 / (2 sigma^2)),
/// hence k^2(x, y) = exp(-||x - y||^2 / sigma^2). The derived constants are
///   normalization   M = (pi sigma^2)^(-n/2)   (so that M * k^2 integrates to 1),
///   each component is a Gaussian with covariance (sigma^2 / 2) * I, which is
///   also the equivalent KDE bandwidth (std sigma / sqrt(2)) and the ancestral
///   sampling covariance.
/// Optimizers drive the bandwidth through the unconstrained log_sigma view;
/// evaluation applies a floor sigma_min.
class KernelSpec {
 public:
  static KernelSpec cosine(int dim);
  static KernelSpec rbf(int dim, double sigma, double sigma_min = 1e-3);
  static KernelSpec product(KernelSpec x_factor, KernelSpec y_factor);

  KernelKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }

  bool is_rbf() const noexcept { return kind_ == KernelKind::rbf; }
  bool is_cosine() const noexcept { return kind_ == KernelKind::cosine; }
  bool is_product() const noexcept { return kind_ == KernelKind::product; }

  /// Effective bandwidth: max(exp(log_sigma), sigma_min). RBF only.
  double sigma() const;
  double log_sigma() const;
  void set_log_sigma(double log_sigma);
  double sigma_min() const;

  const KernelSpec& factor_x() const;
  const KernelSpec& factor_y() const;

 private:
  KernelSpec(KernelKind kind, int dim) : kind_(kind), dim_(dim) {}

  KernelKind kind_;
  int dim_ = 0;
  double sigma_ = 1.0;  // authoritative; log view derived so JSON round-trips exactly
  double sigma_min_ = 1e-3;
  std::shared_ptr<const KernelSpec> fx_, fy_;
};

/// Structural equality: same kind, dim, factors; sigma equal within 1e-12.
bool structurally_equal(const KernelSpec& a, const KernelSpec& b);

const char* kernel_kind_name(KernelKind kind);
KernelKind kernel_kind_from_name(const std::string& name);

/// k^2(x, y). Symmetric, unit diagonal, in [0, 1] for cosine and rbf.
double eval_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y);

/// Pairwise k^2 between rows of X (m x n) and rows of Y (m' x n).
/// Bit-identical to an elementwise eval_sq loop; may parallelize internally.
Eigen::MatrixXd gram_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::MatrixXd>& Y);

/// RBF Gram together with the squared-distance matrix (reused by trainers
/// for the log-sigma gradient). Entries bit-identical to eval_sq.
void gram_sq_rbf_with_dist(const KernelSpec& k,
                           const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::MatrixXd>& Y,
                           Eigen::MatrixXd& gram, Eigen::MatrixXd& dist_sq);

/// The constant that turns the projection function into a density (Eq. over
/// the kernel's domain): 1 for cosine, (pi sigma^2)^(-n/2) for rbf, and the
/// product of factor constants for product kernels.
double norm_const(const KernelSpec& k);

struct KernelGradSq {
  Eigen::VectorXd d_x;       // d k^2 / d x
  Eigen::VectorXd d_y;       // d k^2 / d y
  double d_log_sigma = 0.0;  // d k^2 / d log(sigma); 0 for cosine or floored sigma
};

/// Analytic gradients of k^2 at (x, y).
KernelGradSq grad_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y);

namespace detail {

constexpr double kZeroNormTol = 1e-12;

inline double squared_norm_checked(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double n2 = v.squaredNorm();
  if (n2 < kZeroNormTol * kZeroNormTol) {
    throw Error(ErrorCode::zero_vector, "cosine kernel on (near-)zero vector");
  }
  return n2;
}

inline double cosine_sq(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y) {
  double nx = squared_norm_checked(x);
  double ny = squared_norm_checked(y);
  double dot = x.dot(y);
  return (dot * dot) / (nx * ny);
}

inline double rbf_sq_from_dist(double dist_sq, double sigma) {
  return std::exp(-dist_sq / (sigma * sigma));
}

}  // namespace detail

}  // namespace kdm
