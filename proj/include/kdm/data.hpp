#pragma once

#include <string>
#include <vector>

#include "kdm/rng.hpp"
#include "kdm/training.hpp"

namespace kdm {

enum class ColumnRole { numeric, categorical, label };

struct TabularSchema {
  std::vector<ColumnRole> roles;
  std::string positive_class;  // binary tasks: this label maps to index 1
  bool has_header = false;
  std::vector<std::string> missing_tokens = {"", "?"};

  /// Optional pinned encodings (written back by fit so later files encode
  /// identically). Empty: learned from the file in first-appearance order.
  /// With pinned categories, unseen values map to the all-zeros block.
  std::vector<std::vector<std::string>> pinned_categories;  // per column
  std::vector<std::string> pinned_label_classes;

  void validate() const;
};

struct TabularData {
  LabeledDataset data;  // X: numeric + one-hot blocks, Y: one-hot labels
  std::vector<std::string> feature_names;
  std::vector<std::vector<std::string>> categories;  // per column (empty if not categorical)
  std::vector<std::string> label_classes;            // index 1 = positive class
  Eigen::Index dropped_rows = 0;          // rows removed for missing values
  Eigen::Index unknown_category_cells = 0;  // pinned-mode cells mapped to zeros
};

/// The schema with this file's learned encodings pinned.
TabularSchema pinned_schema(const TabularSchema& schema, const TabularData& loaded);

/// Loads a comma-separated file under the given schema. Numeric columns
/// parse as doubles; categorical columns one-hot expand in first-appearance
/// order; rows with missing fields are dropped (counted in the result).
TabularData load_csv(const std::string& path, const TabularSchema& schema);

/// Column statistics learned on training rows only. Constant columns
/// (std < 1e-12) are centered but not scaled.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 1 for constant columns

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& X) const;
};

Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& train);

struct SplitIndices {
  std::vector<Eigen::Index> train, validation, test;
};

/// Seeded shuffle followed by a disjoint, exhaustive partition.
SplitIndices split_rows(Eigen::Index n_rows, double train_frac, double val_frac,
                        double test_frac, std::uint64_t seed);

Eigen::MatrixXd take_rows(const Eigen::Ref<const Eigen::MatrixXd>& m,
                          const std::vector<Eigen::Index>& rows);

/// Bag construction for label-proportion experiments. Per bag: draw a label
/// proportion uniformly from lp_range, round positives to the nearest count
/// (ties toward more positives), then sample instances without replacement
/// from per-class pools that reshuffle when exhausted. The recorded
/// proportion row is the realized one, ordered (negative, positive).
BagDataset make_bags(const LabeledDataset& data, int bag_size,
                     std::pair<double, double> lp_range, int n_bags,
                     RngState& rng);

}  // namespace kdm
