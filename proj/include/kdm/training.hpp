#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kdm/kdm.hpp"
#include "kdm/rng.hpp"

namespace kdm {

enum class Optimizer { sgd, adaptive_moment };
enum class LossKind { cross_entropy, mse };

struct SigmaInit {
  enum class Mode { median_heuristic, explicit_value };
  Mode mode = Mode::median_heuristic;
  double value = 1.0;

  static SigmaInit median() { return {Mode::median_heuristic, 1.0}; }
  static SigmaInit explicit_sigma(double v) { return {Mode::explicit_value, v}; }
};

struct TrainConfig {
  int num_components = 16;
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adaptive_moment;
  std::uint64_t seed = 0;
  SigmaInit sigma_init = SigmaInit::median();
  double sigma_min = 1e-3;
  bool train_y_components = true;

  void validate() const;
};

struct LabeledDataset {
  Eigen::MatrixXd X;  // l x n_x
  Eigen::MatrixXd Y;  // l x n_y; one-hot rows for classification, raw for regression

  Eigen::Index size() const { return X.rows(); }
  void validate() const;
};

struct BagDataset {
  std::vector<Eigen::MatrixXd> bags;  // bag i: m_i x n_x
  Eigen::MatrixXd proportions;        // n_bags x n_y, rows on the simplex

  Eigen::Index size() const { return static_cast<Eigen::Index>(bags.size()); }
  void validate() const;
};

/// Cross-entropy between a predicted PMF and a target simplex row:
/// -sum_j y_j log(clamp(pi_j, 1e-12, 1)).
double loss_xent(const Eigen::Ref<const Eigen::VectorXd>& pi,
                 const Eigen::Ref<const Eigen::VectorXd>& y);

/// Mean squared componentwise error.
double loss_mse(const Eigen::Ref<const Eigen::VectorXd>& y_hat,
                const Eigen::Ref<const Eigen::VectorXd>& y);

/// Median pairwise distance of up to 1000 subsampled rows, divided by
/// sqrt(2). The standard bandwidth initializer.
double median_heuristic_sigma(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              RngState& rng);

// ---------------------------------------------------------------------------
// Differentiable objectives over joint-model parameters.
// ---------------------------------------------------------------------------

/// Optimizable parameters of a (joint) KDM model. Weights are driven through
/// softmax logits and bandwidths through log sigma, so every step stays on
/// the simplex and keeps sigma positive.
struct JointParams {
  Eigen::MatrixXd x_components;   // m' x n_x
  Eigen::MatrixXd y_components;   // m' x n_y (0 x 0 for plain density models)
  Eigen::VectorXd weight_logits;  // m'
  double log_sigma_x = 0.0;       // meaningful iff the x kernel is rbf
  double log_sigma_y = 0.0;       // meaningful iff the y kernel is rbf
};

struct GradientBundle {
  Eigen::MatrixXd d_x_components;
  Eigen::MatrixXd d_y_components;
  Eigen::VectorXd d_weight_logits;
  double d_log_sigma_x = 0.0;
  double d_log_sigma_y = 0.0;
};

/// A batch of input groups. A group is one training unit: a single sample
/// row for pointwise losses, or a whole bag for label-proportion training.
struct TrainBatch {
  Eigen::MatrixXd x_rows;                    // total rows x n_x
  std::vector<Eigen::Index> group_offsets;   // size n_groups + 1
  Eigen::MatrixXd targets;                   // n_groups x n_y (0 x 0 when unused)

  Eigen::Index num_groups() const {
    return static_cast<Eigen::Index>(group_offsets.size()) - 1;
  }
  static TrainBatch pointwise(Eigen::MatrixXd rows, Eigen::MatrixXd targets);
};

enum class ObjectiveKind {
  density_nll,    // -mean log(M_x f(x) + eps)
  joint_nll,      // -mean log(M_x M_y f(x, y) + eps)
  cross_entropy,  // mean xent(pi(infer(group)), target)
  mse,            // mean mse(yhat(infer(group)), target)
};

/// Scalar training objective (mean over batch groups) with analytic
/// gradients; gradient entries match central finite differences.
class Objective {
 public:
  Objective(ObjectiveKind kind, KernelSpec x_kernel,
            std::optional<KernelSpec> y_kernel, bool train_y_components);

  ObjectiveKind kind() const { return kind_; }

  double value(const JointParams& params, const TrainBatch& batch) const;
  double value_and_gradient(const JointParams& params, const TrainBatch& batch,
                            GradientBundle& grad) const;

  /// Kernels with the bandwidth taken from the given parameters.
  KernelSpec effective_x_kernel(const JointParams& params) const;
  KernelSpec effective_y_kernel(const JointParams& params) const;

 private:
  ObjectiveKind kind_;
  KernelSpec x_kernel_;
  std::optional<KernelSpec> y_kernel_;
  bool train_y_components_;
};

/// Spec surface: analytic gradients of the objective at `params` on `batch`.
GradientBundle objective_gradients(const Objective& objective,
                                   const JointParams& params,
                                   const TrainBatch& batch);

// ---------------------------------------------------------------------------
// Fitting entry points.
// ---------------------------------------------------------------------------

struct MetricsRecord {
  int epoch = 0;          // 0 is the initial (pre-training) objective
  double objective = 0.0;
  double wall_time_s = 0.0;
};

struct TrainTrace {
  std::vector<MetricsRecord> records;
};

/// Components = data rows, uniform weights (the KDE estimator).
KernelDensityMatrix fit_nonparametric(const Eigen::MatrixXd& X, const KernelSpec& k);

struct KdmFit {
  KernelDensityMatrix model;
  TrainTrace trace;
};

struct JointFit {
  JointKDM model;
  TrainTrace trace;
};

/// Maximum-likelihood density fit over plain samples.
KdmFit fit_mle(const Eigen::MatrixXd& X, const KernelSpec& kx, const TrainConfig& cfg);

/// Maximum-likelihood fit of a joint model over (x, y) pairs.
JointFit fit_mle(const LabeledDataset& data, const KernelSpec& kx,
                 const KernelSpec& ky, const TrainConfig& cfg);

/// Discriminative training: forward = inference of each sample's point KDM
/// through the joint, loss = cross-entropy (cosine y) or mse (rbf y).
JointFit fit_discriminative(const LabeledDataset& data, const KernelSpec& kx,
                            const KernelSpec& ky, LossKind loss,
                            const TrainConfig& cfg);

/// Label-proportion training: each bag becomes a uniform-weight input KDM;
/// the target is the bag's proportion row; loss is cross-entropy.
JointFit fit_llp(const BagDataset& bags, const KernelSpec& kx, const KernelSpec& ky,
                 const TrainConfig& cfg);

}  // namespace kdm
