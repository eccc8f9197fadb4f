#include "kdm/kernels.hpp"

#include <cmath>
#include <numbers>

namespace kdm {

KernelSpec KernelSpec::cosine(int dim) {
  if (dim <= 0) throw Error(ErrorCode::bad_config, "kernel dim must be positive");
  return KernelSpec(KernelKind::cosine, dim);
}

KernelSpec KernelSpec::rbf(int dim, double sigma, double sigma_min) {
  if (dim <= 0) throw Error(ErrorCode::bad_config, "kernel dim must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::bad_config, "rbf sigma must be positive and finite");
  }
  if (!(sigma_min > 0.0)) {
    throw Error(ErrorCode::bad_config, "sigma_min must be positive");
  }
  KernelSpec k(KernelKind::rbf, dim);
  k.sigma_ = sigma;
  k.sigma_min_ = sigma_min;
  return k;
}

KernelSpec KernelSpec::product(KernelSpec x_factor, KernelSpec y_factor) {
  KernelSpec k(KernelKind::product, x_factor.dim() + y_factor.dim());
  k.fx_ = std::make_shared<const KernelSpec>(std::move(x_factor));
  k.fy_ = std::make_shared<const KernelSpec>(std::move(y_factor));
  return k;
}

double KernelSpec::sigma() const {
  if (kind_ != KernelKind::rbf) {
    throw Error(ErrorCode::wrong_kernel_kind, "sigma is defined for rbf kernels only");
  }
  return std::max(sigma_, sigma_min_);
}

double KernelSpec::log_sigma() const {
  if (kind_ != KernelKind::rbf) {
    throw Error(ErrorCode::wrong_kernel_kind, "log_sigma is defined for rbf kernels only");
  }
  return std::log(sigma_);
}

void KernelSpec::set_log_sigma(double log_sigma) {
  if (kind_ != KernelKind::rbf) {
    throw Error(ErrorCode::wrong_kernel_kind, "log_sigma is defined for rbf kernels only");
  }
  if (!std::isfinite(log_sigma)) {
    throw Error(ErrorCode::bad_config, "log_sigma must be finite");
  }
  sigma_ = std::exp(log_sigma);
}

double KernelSpec::sigma_min() const { return sigma_min_; }

const KernelSpec& KernelSpec::factor_x() const {
  if (!fx_) throw Error(ErrorCode::wrong_kernel_kind, "kernel has no factors");
  return *fx_;
}

const KernelSpec& KernelSpec::factor_y() const {
  if (!fy_) throw Error(ErrorCode::wrong_kernel_kind, "kernel has no factors");
  return *fy_;
}

bool structurally_equal(const KernelSpec& a, const KernelSpec& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim()) return false;
  switch (a.kind()) {
    case KernelKind::cosine:
      return true;
    case KernelKind::rbf:
      return std::abs(a.sigma() - b.sigma()) <= 1e-12;
    case KernelKind::product:
      return structurally_equal(a.factor_x(), b.factor_x()) &&
             structurally_equal(a.factor_y(), b.factor_y());
  }
  return false;
}

const char* kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::cosine: return "cosine";
    case KernelKind::rbf: return "rbf";
    case KernelKind::product: return "product";
  }
  return "?";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "cosine") return KernelKind::cosine;
  if (name == "rbf") return KernelKind::rbf;
  if (name == "product") return KernelKind::product;
  throw Error(ErrorCode::bad_config, "unknown kernel kind '" + name + "'");
}

namespace {

void check_dim(const KernelSpec& k, Eigen::Index got) {
  if (got != k.dim()) {
    throw Error(ErrorCode::dim_mismatch,
                "kernel expects dim " + std::to_string(k.dim()) + ", got " +
                    std::to_string(got));
  }
}

}  // namespace

double eval_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_dim(k, x.size());
  check_dim(k, y.size());
  switch (k.kind()) {
    case KernelKind::cosine:
      return detail::cosine_sq(x, y);
    case KernelKind::rbf:
      return detail::rbf_sq_from_dist((x - y).squaredNorm(), k.sigma());
    case KernelKind::product: {
      int nx = k.factor_x().dim();
      return eval_sq(k.factor_x(), x.head(nx), y.head(nx)) *
             eval_sq(k.factor_y(), x.tail(x.size() - nx), y.tail(y.size() - nx));
    }
  }
  throw Error(ErrorCode::bad_config, "unreachable kernel kind");
}

Eigen::MatrixXd gram_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::MatrixXd>& Y) {
  check_dim(k, X.cols());
  check_dim(k, Y.cols());
  const Eigen::Index m = X.rows(), mp = Y.rows();
  Eigen::MatrixXd out(m, mp);
  switch (k.kind()) {
    case KernelKind::cosine: {
      Eigen::VectorXd nx(m), ny(mp);
      for (Eigen::Index i = 0; i < m; ++i)
        nx[i] = detail::squared_norm_checked(X.row(i).transpose());
      for (Eigen::Index j = 0; j < mp; ++j)
        ny[j] = detail::squared_norm_checked(Y.row(j).transpose());
#pragma omp parallel for schedule(static) if (m * mp > 4096)
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < mp; ++j) {
          double dot = X.row(i).dot(Y.row(j));
          out(i, j) = (dot * dot) / (nx[i] * ny[j]);
        }
      }
      break;
    }
    case KernelKind::rbf: {
      const double sigma = k.sigma();
#pragma omp parallel for schedule(static) if (m * mp > 4096)
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < mp; ++j) {
          out(i, j) = detail::rbf_sq_from_dist((X.row(i) - Y.row(j)).squaredNorm(), sigma);
        }
      }
      break;
    }
    case KernelKind::product: {
      int nx = k.factor_x().dim();
      out = gram_sq(k.factor_x(), X.leftCols(nx), Y.leftCols(nx));
      out.array() *= gram_sq(k.factor_y(), X.rightCols(X.cols() - nx),
                             Y.rightCols(Y.cols() - nx))
                         .array();
      break;
    }
  }
  return out;
}

void gram_sq_rbf_with_dist(const KernelSpec& k,
                           const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::MatrixXd>& Y,
                           Eigen::MatrixXd& gram, Eigen::MatrixXd& dist_sq) {
  if (!k.is_rbf()) {
    throw Error(ErrorCode::wrong_kernel_kind, "gram_sq_rbf_with_dist needs an rbf kernel");
  }
  check_dim(k, X.cols());
  check_dim(k, Y.cols());
  const Eigen::Index m = X.rows(), mp = Y.rows();
  const double sigma = k.sigma();
  gram.resize(m, mp);
  dist_sq.resize(m, mp);
#pragma omp parallel for schedule(static) if (m * mp > 4096)
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < mp; ++j) {
      double d2 = (X.row(i) - Y.row(j)).squaredNorm();
      dist_sq(i, j) = d2;
      gram(i, j) = detail::rbf_sq_from_dist(d2, sigma);
    }
  }
}

double norm_const(const KernelSpec& k) {
  switch (k.kind()) {
    case KernelKind::cosine:
      return 1.0;
    case KernelKind::rbf: {
      double sigma = k.sigma();
      return std::pow(std::numbers::pi * sigma * sigma, -0.5 * k.dim());
    }
    case KernelKind::product:
      return norm_const(k.factor_x()) * norm_const(k.factor_y());
  }
  throw Error(ErrorCode::bad_config, "unreachable kernel kind");
}

KernelGradSq grad_sq(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_dim(k, x.size());
  check_dim(k, y.size());
  KernelGradSq g;
  switch (k.kind()) {
    case KernelKind::cosine: {
      double nx = detail::squared_norm_checked(x);
      double ny = detail::squared_norm_checked(y);
      double dot = x.dot(y);
      double ksq = (dot * dot) / (nx * ny);
      // d k^2 / d x = 2 dot / (nx ny) * y - 2 k^2 / nx * x, symmetric in y.
      g.d_x = (2.0 * dot / (nx * ny)) * y - (2.0 * ksq / nx) * x;
      g.d_y = (2.0 * dot / (nx * ny)) * x - (2.0 * ksq / ny) * y;
      g.d_log_sigma = 0.0;
      break;
    }
    case KernelKind::rbf: {
      double sigma = k.sigma();
      double d2 = (x - y).squaredNorm();
      double ksq = detail::rbf_sq_from_dist(d2, sigma);
      Eigen::VectorXd diff = x - y;
      g.d_x = (-2.0 * ksq / (sigma * sigma)) * diff;
      g.d_y = -g.d_x;
      // sigma below the floor evaluates as the constant sigma_min.
      bool active = std::exp(k.log_sigma()) >= k.sigma_min();
      g.d_log_sigma = active ? (2.0 * d2 / (sigma * sigma)) * ksq : 0.0;
      break;
    }
    case KernelKind::product: {
      int nx = k.factor_x().dim();
      Eigen::VectorXd x1 = x.head(nx), y1 = y.head(nx);
      Eigen::VectorXd x2 = x.tail(x.size() - nx), y2 = y.tail(y.size() - nx);
      double k1 = eval_sq(k.factor_x(), x1, y1);
      double k2 = eval_sq(k.factor_y(), x2, y2);
      KernelGradSq g1 = grad_sq(k.factor_x(), x1, y1);
      KernelGradSq g2 = grad_sq(k.factor_y(), x2, y2);
      g.d_x.resize(x.size());
      g.d_y.resize(y.size());
      g.d_x << g1.d_x * k2, g2.d_x * k1;
      g.d_y << g1.d_y * k2, g2.d_y * k1;
      // One shared log-sigma axis only makes sense when a single factor is rbf.
      g.d_log_sigma = g1.d_log_sigma * k2 + g2.d_log_sigma * k1;
      break;
    }
  }
  return g;
}

}  // namespace kdm
