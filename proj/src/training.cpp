#include "kdm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace kdm {

namespace {

constexpr double kXentClampLo = 1e-12;

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd softmax_backward(const Eigen::VectorXd& w, const Eigen::VectorXd& dw) {
  double mix = dw.dot(w);
  return w.array() * (dw.array() - mix);
}

// Per-batch kernel evaluations kept around for the backward pass.
struct SideCache {
  Eigen::MatrixXd G;           // rows x m'
  Eigen::MatrixXd D2;          // rbf: squared distances
  Eigen::MatrixXd Dot;         // cosine: <row, comp>
  Eigen::VectorXd row_norm2;   // cosine
  Eigen::VectorXd comp_norm2;  // cosine
};

SideCache make_side_cache(const KernelSpec& k, const Eigen::MatrixXd& rows,
                          const Eigen::MatrixXd& comps) {
  SideCache c;
  if (k.is_rbf()) {
    gram_sq_rbf_with_dist(k, rows, comps, c.G, c.D2);
  } else if (k.is_cosine()) {
    c.G = gram_sq(k, rows, comps);
    c.Dot.noalias() = rows * comps.transpose();
    c.row_norm2 = rows.rowwise().squaredNorm();
    c.comp_norm2 = comps.rowwise().squaredNorm();
  } else {
    throw Error(ErrorCode::wrong_kernel_kind,
                "training supports cosine and rbf kernel sides");
  }
  return c;
}

/// Accumulates d(objective)/d(comps) and, for rbf, d/d(log sigma) given
/// d(objective)/dG.
void kernel_backward(const KernelSpec& k, const SideCache& cache,
                     const Eigen::MatrixXd& rows, const Eigen::MatrixXd& comps,
                     const Eigen::MatrixXd& dG, bool sigma_active,
                     Eigen::MatrixXd& d_comps, double& d_log_sigma) {
  if (k.is_rbf()) {
    const double s2 = k.sigma() * k.sigma();
    Eigen::MatrixXd A = dG.cwiseProduct(cache.G);
    d_comps.noalias() += (2.0 / s2) * (A.transpose() * rows -
                                       A.colwise().sum().transpose().asDiagonal() * comps);
    if (sigma_active) {
      d_log_sigma += (2.0 / s2) * A.cwiseProduct(cache.D2).sum();
    }
  } else {
    // k^2 = dot^2 / (|row|^2 |comp|^2):
    //   d k^2 / d comp = (2 dot / (|row|^2 |comp|^2)) row - (2 k^2 / |comp|^2) comp
    Eigen::MatrixXd U =
        2.0 * cache.Dot.array() /
        (cache.row_norm2 * cache.comp_norm2.transpose()).array();
    Eigen::MatrixXd dGU = dG.cwiseProduct(U);
    Eigen::VectorXd vcol =
        (2.0 * dG.cwiseProduct(cache.G)).colwise().sum().transpose().cwiseQuotient(
            cache.comp_norm2);
    d_comps.noalias() += dGU.transpose() * rows;
    d_comps.noalias() -= vcol.asDiagonal() * comps;
  }
}

struct ForwardState {
  Eigen::VectorXd w;            // softmax weights
  SideCache x_cache;            // kernel values of all batch rows vs x comps
  Eigen::VectorXd denom;        // per row
  std::vector<bool> degenerate; // per row: denominator underflow
  Eigen::MatrixXd resp;         // per-row responsibilities
  Eigen::MatrixXd p2;           // per-group output weights (n_groups x m')
};

}  // namespace

void TrainConfig::validate() const {
  if (num_components < 1) throw Error(ErrorCode::bad_config, "num_components must be >= 1");
  if (epochs < 0) throw Error(ErrorCode::bad_config, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::bad_config, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::bad_config, "learning_rate must be > 0");
  if (!(sigma_min > 0.0)) throw Error(ErrorCode::bad_config, "sigma_min must be > 0");
  if (sigma_init.mode == SigmaInit::Mode::explicit_value && !(sigma_init.value > 0.0)) {
    throw Error(ErrorCode::bad_config, "explicit sigma_init must be > 0");
  }
}

void LabeledDataset::validate() const {
  if (X.rows() < 1) throw Error(ErrorCode::empty_dataset, "dataset has no rows");
  if (X.rows() != Y.rows()) {
    throw Error(ErrorCode::label_shape_mismatch,
                "X has " + std::to_string(X.rows()) + " rows, Y has " +
                    std::to_string(Y.rows()));
  }
}

void BagDataset::validate() const {
  if (bags.empty()) throw Error(ErrorCode::empty_dataset, "no bags");
  if (proportions.rows() != size()) {
    throw Error(ErrorCode::label_shape_mismatch,
                "proportion rows do not match bag count");
  }
  for (const auto& bag : bags) {
    if (bag.rows() < 1) throw Error(ErrorCode::empty_dataset, "empty bag");
    if (bag.cols() != bags.front().cols()) {
      throw Error(ErrorCode::dim_mismatch, "bags have inconsistent feature dims");
    }
  }
  for (Eigen::Index i = 0; i < proportions.rows(); ++i) {
    double s = proportions.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9) {
      throw Error(ErrorCode::bad_weights,
                  "proportion row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

double loss_xent(const Eigen::Ref<const Eigen::VectorXd>& pi,
                 const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (pi.size() != y.size()) {
    throw Error(ErrorCode::shape_mismatch, "pi and y have different lengths");
  }
  constexpr double kSimplexTol = 1e-6;
  if (std::abs(pi.sum() - 1.0) > kSimplexTol || std::abs(y.sum() - 1.0) > kSimplexTol) {
    throw Error(ErrorCode::shape_mismatch, "loss_xent inputs must lie on the simplex");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < pi.size(); ++j) {
    acc -= y[j] * std::log(std::clamp(pi[j], kXentClampLo, 1.0));
  }
  return acc;
}

double loss_mse(const Eigen::Ref<const Eigen::VectorXd>& y_hat,
                const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y_hat.size() != y.size()) {
    throw Error(ErrorCode::shape_mismatch, "y_hat and y have different lengths");
  }
  return (y_hat - y).squaredNorm() / static_cast<double>(y.size());
}

double median_heuristic_sigma(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              RngState& rng) {
  const Eigen::Index n = X.rows();
  const Eigen::Index take = std::min<Eigen::Index>(n, 1000);
  std::vector<Eigen::Index> idx = rng.sample_without_replacement(n, take);
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(take) * (take - 1) / 2);
  for (Eigen::Index a = 0; a < take; ++a) {
    for (Eigen::Index b = a + 1; b < take; ++b) {
      dists.push_back((X.row(idx[a]) - X.row(idx[b])).norm());
    }
  }
  if (dists.empty()) return 1.0;
  std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  if (dists.size() % 2 == 0) {
    double lower = *std::max_element(dists.begin(), dists.begin() + mid);
    med = 0.5 * (med + lower);
  }
  return med / std::numbers::sqrt2;
}

TrainBatch TrainBatch::pointwise(Eigen::MatrixXd rows, Eigen::MatrixXd targets) {
  TrainBatch b;
  b.group_offsets.resize(static_cast<std::size_t>(rows.rows()) + 1);
  for (std::size_t i = 0; i < b.group_offsets.size(); ++i) {
    b.group_offsets[i] = static_cast<Eigen::Index>(i);
  }
  b.x_rows = std::move(rows);
  b.targets = std::move(targets);
  return b;
}

Objective::Objective(ObjectiveKind kind, KernelSpec x_kernel,
                     std::optional<KernelSpec> y_kernel, bool train_y_components)
    : kind_(kind),
      x_kernel_(std::move(x_kernel)),
      y_kernel_(std::move(y_kernel)),
      train_y_components_(train_y_components) {
  if (kind_ != ObjectiveKind::density_nll && !y_kernel_) {
    throw Error(ErrorCode::bad_config, "objective requires a y kernel");
  }
  if (kind_ == ObjectiveKind::cross_entropy && !y_kernel_->is_cosine()) {
    throw Error(ErrorCode::wrong_kernel_kind, "cross-entropy needs a cosine y kernel");
  }
  if (kind_ == ObjectiveKind::mse && !y_kernel_->is_rbf()) {
    throw Error(ErrorCode::wrong_kernel_kind, "mse needs an rbf y kernel");
  }
}

KernelSpec Objective::effective_x_kernel(const JointParams& params) const {
  if (!x_kernel_.is_rbf()) return x_kernel_;
  double sigma = std::exp(params.log_sigma_x);
  if (!std::isfinite(sigma)) {
    throw Error(ErrorCode::non_finite_loss, "log_sigma_x diverged");
  }
  return KernelSpec::rbf(x_kernel_.dim(), sigma, x_kernel_.sigma_min());
}

KernelSpec Objective::effective_y_kernel(const JointParams& params) const {
  if (!y_kernel_) {
    throw Error(ErrorCode::bad_config, "objective has no y kernel");
  }
  if (!y_kernel_->is_rbf()) return *y_kernel_;
  double sigma = std::exp(params.log_sigma_y);
  if (!std::isfinite(sigma)) {
    throw Error(ErrorCode::non_finite_loss, "log_sigma_y diverged");
  }
  return KernelSpec::rbf(y_kernel_->dim(), sigma, y_kernel_->sigma_min());
}

namespace {

/// Shared forward pass for the inference-based objectives (xent / mse).
ForwardState inference_forward(const KernelSpec& kx, const JointParams& params,
                               const TrainBatch& batch) {
  ForwardState st;
  st.w = softmax(params.weight_logits);
  st.x_cache = make_side_cache(kx, batch.x_rows, params.x_components);
  const Eigen::MatrixXd& G = st.x_cache.G;
  const Eigen::Index rows = G.rows();
  const Eigen::Index mp = G.cols();
  st.denom = G * st.w;
  st.degenerate.assign(static_cast<std::size_t>(rows), false);
  st.resp.resize(rows, mp);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (st.denom[r] < kDegenerateDenominator) {
      st.degenerate[static_cast<std::size_t>(r)] = true;
      st.resp.row(r) = st.w.transpose();
    } else {
      st.resp.row(r) = G.row(r).cwiseProduct(st.w.transpose()) / st.denom[r];
    }
  }
  const Eigen::Index n_groups = batch.num_groups();
  st.p2.resize(n_groups, mp);
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    Eigen::Index lo = batch.group_offsets[static_cast<std::size_t>(g)];
    Eigen::Index hi = batch.group_offsets[static_cast<std::size_t>(g) + 1];
    st.p2.row(g) = st.resp.middleRows(lo, hi - lo).colwise().mean();
  }
  return st;
}

/// Backward from d(objective)/d(p2) through responsibilities and softmax.
void inference_backward(const KernelSpec& kx, const JointParams& params,
                        const TrainBatch& batch, const ForwardState& st,
                        const Eigen::MatrixXd& dP2, GradientBundle& grad) {
  const Eigen::MatrixXd& G = st.x_cache.G;
  const Eigen::Index rows = G.rows();
  const Eigen::Index mp = G.cols();
  Eigen::MatrixXd dG = Eigen::MatrixXd::Zero(rows, mp);
  Eigen::VectorXd dw = Eigen::VectorXd::Zero(mp);
  for (Eigen::Index g = 0; g < batch.num_groups(); ++g) {
    Eigen::Index lo = batch.group_offsets[static_cast<std::size_t>(g)];
    Eigen::Index hi = batch.group_offsets[static_cast<std::size_t>(g) + 1];
    Eigen::RowVectorXd d_row = dP2.row(g) / static_cast<double>(hi - lo);
    for (Eigen::Index r = lo; r < hi; ++r) {
      if (st.degenerate[static_cast<std::size_t>(r)]) {
        dw += d_row.transpose();
        continue;
      }
      double mix = d_row.dot(st.resp.row(r));
      Eigen::RowVectorXd shifted = (d_row.array() - mix).matrix();
      dG.row(r) = st.w.transpose().cwiseProduct(shifted) / st.denom[r];
      dw += (G.row(r) / st.denom[r]).cwiseProduct(shifted).transpose();
    }
  }
  grad.d_weight_logits += softmax_backward(st.w, dw);
  bool sigma_active = kx.is_rbf() && std::exp(params.log_sigma_x) >= kx.sigma_min();
  kernel_backward(kx, st.x_cache, batch.x_rows, params.x_components, dG,
                  sigma_active, grad.d_x_components, grad.d_log_sigma_x);
}

struct NllPieces {
  Eigen::VectorXd w;
  SideCache x_cache, y_cache;
  Eigen::VectorXd mix;   // per sample: sum_i w_i GX_bi GY_bi
  double m_const;        // M_x (* M_y)
};

NllPieces nll_forward(const Objective& obj, const JointParams& params,
                      const TrainBatch& batch, bool joint) {
  NllPieces p;
  KernelSpec kx = obj.effective_x_kernel(params);
  p.w = softmax(params.weight_logits);
  p.x_cache = make_side_cache(kx, batch.x_rows, params.x_components);
  p.m_const = norm_const(kx);
  if (joint) {
    KernelSpec ky = obj.effective_y_kernel(params);
    p.y_cache = make_side_cache(ky, batch.targets, params.y_components);
    p.m_const *= norm_const(ky);
    p.mix = p.x_cache.G.cwiseProduct(p.y_cache.G) * p.w;
  } else {
    p.mix = p.x_cache.G * p.w;
  }
  return p;
}

double nll_value(const NllPieces& p) {
  double acc = 0.0;
  for (Eigen::Index b = 0; b < p.mix.size(); ++b) {
    acc -= std::log(p.m_const * p.mix[b] + kLogLikelihoodEps);
  }
  return acc / static_cast<double>(p.mix.size());
}

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m, Eigen::VectorXd& norms) {
  norms.resize(m.rows());
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    norms[i] = std::sqrt(detail::squared_norm_checked(m.row(i).transpose()));
    out.row(i) = m.row(i) / norms[i];
  }
  return out;
}

}  // namespace

double Objective::value(const JointParams& params, const TrainBatch& batch) const {
  switch (kind_) {
    case ObjectiveKind::density_nll:
    case ObjectiveKind::joint_nll: {
      NllPieces p = nll_forward(*this, params, batch, kind_ == ObjectiveKind::joint_nll);
      return nll_value(p);
    }
    case ObjectiveKind::cross_entropy: {
      ForwardState st = inference_forward(effective_x_kernel(params), params, batch);
      Eigen::VectorXd norms;
      Eigen::MatrixXd Y2 =
          normalized_rows(params.y_components, norms).array().square().matrix();
      Eigen::MatrixXd pi = st.p2 * Y2;  // n_groups x n_y
      double acc = 0.0;
      for (Eigen::Index g = 0; g < batch.num_groups(); ++g) {
        for (Eigen::Index j = 0; j < pi.cols(); ++j) {
          acc -= batch.targets(g, j) * std::log(std::clamp(pi(g, j), kXentClampLo, 1.0));
        }
      }
      return acc / static_cast<double>(batch.num_groups());
    }
    case ObjectiveKind::mse: {
      ForwardState st = inference_forward(effective_x_kernel(params), params, batch);
      Eigen::MatrixXd yhat = st.p2 * params.y_components;
      double acc = 0.0;
      for (Eigen::Index g = 0; g < batch.num_groups(); ++g) {
        acc += (yhat.row(g) - batch.targets.row(g)).squaredNorm() /
               static_cast<double>(batch.targets.cols());
      }
      return acc / static_cast<double>(batch.num_groups());
    }
  }
  throw Error(ErrorCode::bad_config, "unreachable objective kind");
}

double Objective::value_and_gradient(const JointParams& params,
                                     const TrainBatch& batch,
                                     GradientBundle& grad) const {
  grad.d_x_components = Eigen::MatrixXd::Zero(params.x_components.rows(),
                                              params.x_components.cols());
  grad.d_y_components = Eigen::MatrixXd::Zero(params.y_components.rows(),
                                              params.y_components.cols());
  grad.d_weight_logits = Eigen::VectorXd::Zero(params.weight_logits.size());
  grad.d_log_sigma_x = 0.0;
  grad.d_log_sigma_y = 0.0;

  const double n_groups = static_cast<double>(batch.num_groups());
  double value_out = 0.0;

  switch (kind_) {
    case ObjectiveKind::density_nll:
    case ObjectiveKind::joint_nll: {
      const bool joint = kind_ == ObjectiveKind::joint_nll;
      KernelSpec kx = effective_x_kernel(params);
      NllPieces p = nll_forward(*this, params, batch, joint);
      value_out = nll_value(p);
      const Eigen::Index B = p.mix.size();
      Eigen::VectorXd dmix(B);
      double d_m_scaled = 0.0;  // sum_b mix_b / (dens_b + eps), reused for sigma terms
      for (Eigen::Index b = 0; b < B; ++b) {
        double dens = p.m_const * p.mix[b];
        dmix[b] = -(p.m_const / (dens + kLogLikelihoodEps)) / static_cast<double>(B);
        d_m_scaled += (p.mix[b] / (dens + kLogLikelihoodEps)) / static_cast<double>(B);
      }
      Eigen::MatrixXd GXGY =
          joint ? p.x_cache.G.cwiseProduct(p.y_cache.G) : p.x_cache.G;
      Eigen::VectorXd dw = GXGY.transpose() * dmix;
      grad.d_weight_logits += softmax_backward(p.w, dw);

      Eigen::MatrixXd dGX =
          dmix * p.w.transpose();  // B x m', then modulated by the other side
      if (joint) {
        Eigen::MatrixXd dGY = dGX.cwiseProduct(p.x_cache.G);
        dGX = dGX.cwiseProduct(p.y_cache.G);
        KernelSpec ky = effective_y_kernel(params);
        bool y_active = ky.is_rbf() && std::exp(params.log_sigma_y) >= ky.sigma_min();
        kernel_backward(ky, p.y_cache, batch.targets, params.y_components, dGY,
                        y_active, grad.d_y_components, grad.d_log_sigma_y);
        if (y_active) {
          // The normalization constant's own sigma dependence:
          // d log M / d log sigma = -n_y.
          grad.d_log_sigma_y += static_cast<double>(ky.dim()) * p.m_const * d_m_scaled;
        }
      }
      bool x_active = kx.is_rbf() && std::exp(params.log_sigma_x) >= kx.sigma_min();
      kernel_backward(kx, p.x_cache, batch.x_rows, params.x_components, dGX,
                      x_active, grad.d_x_components, grad.d_log_sigma_x);
      if (x_active) {
        grad.d_log_sigma_x += static_cast<double>(kx.dim()) * p.m_const * d_m_scaled;
      }
      break;
    }
    case ObjectiveKind::cross_entropy: {
      KernelSpec kx = effective_x_kernel(params);
      ForwardState st = inference_forward(kx, params, batch);
      Eigen::VectorXd norms;
      Eigen::MatrixXd Yn = normalized_rows(params.y_components, norms);
      Eigen::MatrixXd Y2 = Yn.array().square().matrix();
      Eigen::MatrixXd pi = st.p2 * Y2;
      Eigen::MatrixXd dPI = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
      double acc = 0.0;
      for (Eigen::Index g = 0; g < pi.rows(); ++g) {
        for (Eigen::Index j = 0; j < pi.cols(); ++j) {
          double clamped = std::clamp(pi(g, j), kXentClampLo, 1.0);
          acc -= batch.targets(g, j) * std::log(clamped);
          if (pi(g, j) >= kXentClampLo && pi(g, j) <= 1.0) {
            dPI(g, j) = -batch.targets(g, j) / clamped / n_groups;
          }
        }
      }
      value_out = acc / n_groups;
      Eigen::MatrixXd dP2 = dPI * Y2.transpose();
      inference_backward(kx, params, batch, st, dP2, grad);
      if (train_y_components_) {
        Eigen::MatrixXd dYn = (st.p2.transpose() * dPI).cwiseProduct(2.0 * Yn);
        Eigen::VectorXd rowdot = dYn.cwiseProduct(Yn).rowwise().sum();
        Eigen::MatrixXd dCy = dYn - rowdot.asDiagonal() * Yn;
        grad.d_y_components += (dCy.array().colwise() / norms.array()).matrix();
      }
      break;
    }
    case ObjectiveKind::mse: {
      KernelSpec kx = effective_x_kernel(params);
      ForwardState st = inference_forward(kx, params, batch);
      Eigen::MatrixXd yhat = st.p2 * params.y_components;
      Eigen::MatrixXd dYhat(yhat.rows(), yhat.cols());
      double acc = 0.0;
      const double n_y = static_cast<double>(batch.targets.cols());
      for (Eigen::Index g = 0; g < yhat.rows(); ++g) {
        Eigen::RowVectorXd diff = yhat.row(g) - batch.targets.row(g);
        acc += diff.squaredNorm() / n_y;
        dYhat.row(g) = 2.0 * diff / n_y / n_groups;
      }
      value_out = acc / n_groups;
      Eigen::MatrixXd dP2 = dYhat * params.y_components.transpose();
      inference_backward(kx, params, batch, st, dP2, grad);
      if (train_y_components_) {
        grad.d_y_components += st.p2.transpose() * dYhat;
      }
      break;
    }
  }
  if (!train_y_components_) {
    grad.d_y_components.setZero();
  }
  if (!std::isfinite(value_out)) {
    throw Error(ErrorCode::non_finite_loss, "objective value is not finite");
  }
  return value_out;
}

GradientBundle objective_gradients(const Objective& objective,
                                   const JointParams& params,
                                   const TrainBatch& batch) {
  GradientBundle grad;
  objective.value_and_gradient(params, batch, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop.
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  GradientBundle m, v;
  int t = 0;

  static AdamState zeros_like(const JointParams& p) {
    AdamState st;
    auto zero = [](Eigen::Index r, Eigen::Index c) {
      return Eigen::MatrixXd::Zero(r, c);
    };
    st.m.d_x_components = zero(p.x_components.rows(), p.x_components.cols());
    st.m.d_y_components = zero(p.y_components.rows(), p.y_components.cols());
    st.m.d_weight_logits = Eigen::VectorXd::Zero(p.weight_logits.size());
    st.v = st.m;
    return st;
  }
};

double adam_scalar(double& m, double& v, double g, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g * g;
  double mh = m / (1.0 - std::pow(b1, t));
  double vh = v / (1.0 - std::pow(b2, t));
  return lr * mh / (std::sqrt(vh) + eps);
}

template <typename Mat>
void adam_tensor(Mat& m, Mat& v, const Mat& g, Mat& param, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * g;
  v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
  double c1 = 1.0 / (1.0 - std::pow(b1, t));
  double c2 = 1.0 / (1.0 - std::pow(b2, t));
  param.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
}

void optimizer_step(const TrainConfig& cfg, AdamState& st, const GradientBundle& g,
                    JointParams& p, bool sigma_x_used, bool sigma_y_used) {
  if (cfg.optimizer == Optimizer::sgd) {
    p.x_components -= cfg.learning_rate * g.d_x_components;
    if (p.y_components.size() > 0) {
      p.y_components -= cfg.learning_rate * g.d_y_components;
    }
    p.weight_logits -= cfg.learning_rate * g.d_weight_logits;
    if (sigma_x_used) p.log_sigma_x -= cfg.learning_rate * g.d_log_sigma_x;
    if (sigma_y_used) p.log_sigma_y -= cfg.learning_rate * g.d_log_sigma_y;
    return;
  }
  ++st.t;
  adam_tensor(st.m.d_x_components, st.v.d_x_components, g.d_x_components,
              p.x_components, cfg.learning_rate, st.t);
  if (p.y_components.size() > 0) {
    adam_tensor(st.m.d_y_components, st.v.d_y_components, g.d_y_components,
                p.y_components, cfg.learning_rate, st.t);
  }
  adam_tensor(st.m.d_weight_logits, st.v.d_weight_logits, g.d_weight_logits,
              p.weight_logits, cfg.learning_rate, st.t);
  if (sigma_x_used) {
    p.log_sigma_x -= adam_scalar(st.m.d_log_sigma_x, st.v.d_log_sigma_x,
                                 g.d_log_sigma_x, cfg.learning_rate, st.t);
  }
  if (sigma_y_used) {
    p.log_sigma_y -= adam_scalar(st.m.d_log_sigma_y, st.v.d_log_sigma_y,
                                 g.d_log_sigma_y, cfg.learning_rate, st.t);
  }
}

struct GroupedData {
  Eigen::MatrixXd x_all;
  std::vector<Eigen::Index> offsets;  // n_groups + 1
  Eigen::MatrixXd targets;            // n_groups x n_y (0 x 0 if unused)

  Eigen::Index num_groups() const {
    return static_cast<Eigen::Index>(offsets.size()) - 1;
  }

  TrainBatch subset(const std::vector<Eigen::Index>& group_ids) const {
    Eigen::Index total = 0;
    for (Eigen::Index g : group_ids) total += offsets[g + 1] - offsets[g];
    TrainBatch b;
    b.x_rows.resize(total, x_all.cols());
    if (targets.size() > 0) {
      b.targets.resize(static_cast<Eigen::Index>(group_ids.size()), targets.cols());
    }
    b.group_offsets.resize(group_ids.size() + 1);
    b.group_offsets[0] = 0;
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < group_ids.size(); ++i) {
      Eigen::Index g = group_ids[i];
      Eigen::Index len = offsets[g + 1] - offsets[g];
      b.x_rows.middleRows(row, len) = x_all.middleRows(offsets[g], len);
      if (targets.size() > 0) {
        b.targets.row(static_cast<Eigen::Index>(i)) = targets.row(g);
      }
      row += len;
      b.group_offsets[i + 1] = row;
    }
    return b;
  }

  TrainBatch full_batch() const {
    TrainBatch b;
    b.x_rows = x_all;
    b.group_offsets = offsets;
    b.targets = targets;
    return b;
  }
};

enum class YInit { none, literal, sqrt_simplex };

JointParams init_params(const GroupedData& data, const KernelSpec& kx,
                        const std::optional<KernelSpec>& ky, YInit y_init,
                        const TrainConfig& cfg, RngState& rng) {
  const Eigen::Index n_rows = data.x_all.rows();
  const Eigen::Index mp = cfg.num_components;
  std::vector<Eigen::Index> idx =
      mp <= n_rows ? rng.sample_without_replacement(n_rows, mp)
                   : rng.sample_with_replacement(n_rows, mp);

  // Map each row back to its group so sampled instances carry their targets.
  std::vector<Eigen::Index> row_group(static_cast<std::size_t>(n_rows));
  for (Eigen::Index g = 0; g < data.num_groups(); ++g) {
    for (Eigen::Index r = data.offsets[g]; r < data.offsets[g + 1]; ++r) {
      row_group[static_cast<std::size_t>(r)] = g;
    }
  }

  JointParams p;
  p.x_components.resize(mp, data.x_all.cols());
  for (Eigen::Index i = 0; i < mp; ++i) {
    p.x_components.row(i) = data.x_all.row(idx[static_cast<std::size_t>(i)]);
  }
  if (y_init != YInit::none) {
    p.y_components.resize(mp, data.targets.cols());
    for (Eigen::Index i = 0; i < mp; ++i) {
      Eigen::Index g = row_group[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      if (y_init == YInit::sqrt_simplex) {
        p.y_components.row(i) = data.targets.row(g).cwiseMax(0.0).cwiseSqrt();
      } else {
        p.y_components.row(i) = data.targets.row(g);
      }
    }
  } else {
    p.y_components.resize(0, 0);
  }
  p.weight_logits = Eigen::VectorXd::Zero(mp);

  auto init_sigma = [&](const Eigen::MatrixXd& rows) {
    double sigma = cfg.sigma_init.mode == SigmaInit::Mode::explicit_value
                       ? cfg.sigma_init.value
                       : median_heuristic_sigma(rows, rng);
    return std::log(std::max(sigma, cfg.sigma_min));
  };
  if (kx.is_rbf()) p.log_sigma_x = init_sigma(data.x_all);
  if (ky && ky->is_rbf()) p.log_sigma_y = init_sigma(data.targets);
  return p;
}

JointParams run_training(const Objective& obj, const GroupedData& data,
                         JointParams params, const TrainConfig& cfg, RngState& rng,
                         TrainTrace& trace, bool sigma_x_used, bool sigma_y_used) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  TrainBatch full = data.full_batch();
  trace.records.push_back({0, obj.value(params, full), elapsed()});

  AdamState adam = AdamState::zeros_like(params);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.num_groups()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  const Eigen::Index batch_groups =
      std::min<Eigen::Index>(cfg.batch_size, data.num_groups());

  GradientBundle grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_groups)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_groups));
      std::vector<Eigen::Index> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(stop));
      TrainBatch batch = data.subset(ids);
      obj.value_and_gradient(params, batch, grad);
      optimizer_step(cfg, adam, grad, params, sigma_x_used, sigma_y_used);
    }
    trace.records.push_back({epoch, obj.value(params, full), elapsed()});
  }
  return params;
}

GroupedData pointwise_data(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  GroupedData d;
  d.x_all = X;
  d.targets = Y;
  d.offsets.resize(static_cast<std::size_t>(X.rows()) + 1);
  for (std::size_t i = 0; i < d.offsets.size(); ++i) {
    d.offsets[i] = static_cast<Eigen::Index>(i);
  }
  return d;
}

}  // namespace

KernelDensityMatrix fit_nonparametric(const Eigen::MatrixXd& X, const KernelSpec& k) {
  if (X.rows() < 1) throw Error(ErrorCode::empty_dataset, "fit_nonparametric without data");
  Eigen::VectorXd w =
      Eigen::VectorXd::Constant(X.rows(), 1.0 / static_cast<double>(X.rows()));
  return KernelDensityMatrix(X, std::move(w), k);
}

KdmFit fit_mle(const Eigen::MatrixXd& X, const KernelSpec& kx, const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows() < 1) throw Error(ErrorCode::empty_dataset, "fit_mle without data");
  GroupedData data = pointwise_data(X, Eigen::MatrixXd());
  Objective obj(ObjectiveKind::density_nll, kx, std::nullopt, false);
  RngState rng(cfg.seed);
  JointParams params = init_params(data, kx, std::nullopt, YInit::none, cfg, rng);
  TrainTrace trace;
  params = run_training(obj, data, std::move(params), cfg, rng, trace,
                        kx.is_rbf(), false);
  KernelDensityMatrix model(params.x_components, softmax(params.weight_logits),
                            obj.effective_x_kernel(params));
  return KdmFit{std::move(model), std::move(trace)};
}

JointFit fit_mle(const LabeledDataset& data, const KernelSpec& kx,
                 const KernelSpec& ky, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  GroupedData grouped = pointwise_data(data.X, data.Y);
  Objective obj(ObjectiveKind::joint_nll, kx, ky, cfg.train_y_components);
  RngState rng(cfg.seed);
  JointParams params = init_params(grouped, kx, ky, YInit::literal, cfg, rng);
  TrainTrace trace;
  params = run_training(obj, grouped, std::move(params), cfg, rng, trace,
                        kx.is_rbf(), ky.is_rbf());
  JointKDM model(params.x_components, params.y_components,
                 softmax(params.weight_logits), obj.effective_x_kernel(params),
                 obj.effective_y_kernel(params));
  return JointFit{std::move(model), std::move(trace)};
}

namespace {

JointFit fit_grouped_discriminative(GroupedData grouped, ObjectiveKind kind,
                                    const KernelSpec& kx, const KernelSpec& ky,
                                    const TrainConfig& cfg) {
  Objective obj(kind, kx, ky, cfg.train_y_components);
  RngState rng(cfg.seed);
  YInit y_init =
      kind == ObjectiveKind::cross_entropy ? YInit::sqrt_simplex : YInit::literal;
  JointParams params = init_params(grouped, kx, ky, y_init, cfg, rng);
  TrainTrace trace;
  params = run_training(obj, grouped, std::move(params), cfg, rng, trace,
                        kx.is_rbf(), ky.is_rbf());
  JointKDM model(params.x_components, params.y_components,
                 softmax(params.weight_logits), obj.effective_x_kernel(params),
                 obj.effective_y_kernel(params));
  return JointFit{std::move(model), std::move(trace)};
}

}  // namespace

JointFit fit_discriminative(const LabeledDataset& data, const KernelSpec& kx,
                            const KernelSpec& ky, LossKind loss,
                            const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (loss == LossKind::cross_entropy) {
    for (Eigen::Index i = 0; i < data.Y.rows(); ++i) {
      if (std::abs(data.Y.row(i).sum() - 1.0) > 1e-6) {
        throw Error(ErrorCode::label_shape_mismatch,
                    "cross-entropy training expects one-hot label rows");
      }
    }
  }
  return fit_grouped_discriminative(
      pointwise_data(data.X, data.Y),
      loss == LossKind::cross_entropy ? ObjectiveKind::cross_entropy
                                      : ObjectiveKind::mse,
      kx, ky, cfg);
}

JointFit fit_llp(const BagDataset& bags, const KernelSpec& kx, const KernelSpec& ky,
                 const TrainConfig& cfg) {
  cfg.validate();
  bags.validate();
  GroupedData grouped;
  Eigen::Index total = 0;
  for (const auto& bag : bags.bags) total += bag.rows();
  grouped.x_all.resize(total, bags.bags.front().cols());
  grouped.offsets.resize(bags.bags.size() + 1);
  grouped.offsets[0] = 0;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < bags.bags.size(); ++i) {
    grouped.x_all.middleRows(row, bags.bags[i].rows()) = bags.bags[i];
    row += bags.bags[i].rows();
    grouped.offsets[i + 1] = row;
  }
  grouped.targets = bags.proportions;
  return fit_grouped_discriminative(std::move(grouped),
                                    ObjectiveKind::cross_entropy, kx, ky, cfg);
}

}  // namespace kdm
