#include "kdm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace kdm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

void TabularSchema::validate() const {
  int labels = 0, features = 0;
  for (ColumnRole r : roles) {
    if (r == ColumnRole::label) ++labels;
    else ++features;
  }
  if (labels != 1) {
    throw Error(ErrorCode::bad_config, "schema needs exactly one label column");
  }
  if (features < 1) {
    throw Error(ErrorCode::bad_config, "schema needs at least one feature column");
  }
}

TabularData load_csv(const std::string& path, const TabularSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
  }
  const std::unordered_set<std::string> missing(schema.missing_tokens.begin(),
                                                schema.missing_tokens.end());
  const std::size_t n_cols = schema.roles.size();

  std::vector<std::vector<std::string>> raw_rows;
  std::vector<std::string> header;
  std::string line;
  Eigen::Index line_no = 0, dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && schema.has_header) {
      header = split_line(line);
      continue;
    }
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != n_cols) {
      throw Error(ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_cols) + " columns, got " +
                      std::to_string(cells.size()));
    }
    bool has_missing = false;
    for (const auto& c : cells) {
      if (missing.count(c)) { has_missing = true; break; }
    }
    if (has_missing) { ++dropped; continue; }
    raw_rows.push_back(std::move(cells));
  }
  if (raw_rows.empty()) {
    throw Error(ErrorCode::empty_dataset, path + ": no usable rows");
  }

  // First-appearance category orderings per categorical column; label classes.
  std::vector<std::vector<std::string>> categories(n_cols);
  std::vector<std::string> label_classes;
  auto find_or_add = [](std::vector<std::string>& order, const std::string& v) {
    auto it = std::find(order.begin(), order.end(), v);
    if (it != order.end()) return static_cast<Eigen::Index>(it - order.begin());
    order.push_back(v);
    return static_cast<Eigen::Index>(order.size()) - 1;
  };
  for (const auto& row : raw_rows) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (schema.roles[c] == ColumnRole::categorical) {
        find_or_add(categories[c], row[c]);
      } else if (schema.roles[c] == ColumnRole::label) {
        find_or_add(label_classes, row[c]);
      }
    }
  }
  if (!schema.positive_class.empty()) {
    auto it = std::find(label_classes.begin(), label_classes.end(),
                        schema.positive_class);
    if (it == label_classes.end()) {
      throw Error(ErrorCode::bad_config,
                  "positive class '" + schema.positive_class + "' not present");
    }
    if (label_classes.size() != 2) {
      throw Error(ErrorCode::bad_config,
                  "positive_class requires a binary label column, found " +
                      std::to_string(label_classes.size()) + " classes");
    }
    // Convention: index 1 = positive.
    std::string negative = label_classes[0] == schema.positive_class
                               ? label_classes[1]
                               : label_classes[0];
    label_classes = {negative, schema.positive_class};
  }

  // Feature layout and names.
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < n_cols; ++c) {
    std::string base = schema.has_header && c < header.size()
                           ? header[c]
                           : "col" + std::to_string(c);
    if (schema.roles[c] == ColumnRole::numeric) {
      feature_names.push_back(base);
    } else if (schema.roles[c] == ColumnRole::categorical) {
      for (const auto& cat : categories[c]) {
        feature_names.push_back(base + "=" + cat);
      }
    }
  }

  const Eigen::Index n_rows = static_cast<Eigen::Index>(raw_rows.size());
  const Eigen::Index n_features = static_cast<Eigen::Index>(feature_names.size());
  const Eigen::Index n_classes = static_cast<Eigen::Index>(label_classes.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n_rows, n_features);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n_rows, n_classes);

  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = raw_rows[static_cast<std::size_t>(r)];
    Eigen::Index f = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string& cell = row[c];
      switch (schema.roles[c]) {
        case ColumnRole::numeric: {
          try {
            std::size_t pos = 0;
            X(r, f) = std::stod(cell, &pos);
            if (pos != cell.size()) throw std::invalid_argument(cell);
          } catch (const std::exception&) {
            throw Error(ErrorCode::parse_error,
                        path + ": row " + std::to_string(r) + ", column " +
                            std::to_string(c) + ": '" + cell + "' is not numeric");
          }
          ++f;
          break;
        }
        case ColumnRole::categorical: {
          auto it = std::find(categories[c].begin(), categories[c].end(), cell);
          X(r, f + (it - categories[c].begin())) = 1.0;
          f += static_cast<Eigen::Index>(categories[c].size());
          break;
        }
        case ColumnRole::label: {
          auto it = std::find(label_classes.begin(), label_classes.end(), cell);
          Y(r, it - label_classes.begin()) = 1.0;
          break;
        }
      }
    }
  }

  TabularData out;
  out.data = LabeledDataset{std::move(X), std::move(Y)};
  out.feature_names = std::move(feature_names);
  out.label_classes = std::move(label_classes);
  out.dropped_rows = dropped;
  return out;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
  if (X.cols() != mean.size()) {
    throw Error(ErrorCode::dim_mismatch, "standardizer fitted on different width");
  }
  return (X.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& train) {
  if (train.rows() < 2) {
    throw Error(ErrorCode::empty_dataset, "standardization needs at least 2 rows");
  }
  Standardizer s;
  s.mean = train.colwise().mean();
  Eigen::MatrixXd centered = train.rowwise() - s.mean.transpose();
  // Population variance, per the mean-0 / variance-1 convention.
  Eigen::VectorXd var =
      centered.array().square().colwise().sum() / static_cast<double>(train.rows());
  s.scale = var.array().sqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (s.scale[j] < 1e-12) s.scale[j] = 1.0;  // constant column: center only
  }
  return s;
}

SplitIndices split_rows(Eigen::Index n_rows, double train_frac, double val_frac,
                        double test_frac, std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw Error(ErrorCode::bad_fractions, "split fractions must be >= 0 and sum to 1");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_rows));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  RngState rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n_rows)));
  auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n_rows)));
  n_train = std::min(n_train, order.size());
  n_val = std::min(n_val, order.size() - n_train);
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::Ref<const Eigen::MatrixXd>& m,
                          const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

namespace {

/// Class pool that deals indices without replacement and reshuffles when
/// exhausted, skipping indices already placed in the current bag.
class ReplenishingPool {
 public:
  ReplenishingPool(std::vector<Eigen::Index> indices, RngState& rng)
      : indices_(std::move(indices)), rng_(rng) {
    rng_.shuffle(indices_);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(indices_.size()); }

  Eigen::Index draw(const std::unordered_set<Eigen::Index>& in_bag) {
    for (int attempts = 0; attempts < 2; ++attempts) {
      while (cursor_ < indices_.size()) {
        Eigen::Index cand = indices_[cursor_++];
        if (!in_bag.count(cand)) return cand;
      }
      rng_.shuffle(indices_);
      cursor_ = 0;
    }
    throw Error(ErrorCode::insufficient_class_instances,
                "class pool cannot fill the bag without duplicates");
  }

 private:
  std::vector<Eigen::Index> indices_;
  RngState& rng_;
  std::size_t cursor_ = 0;
};

}  // namespace

BagDataset make_bags(const LabeledDataset& data, int bag_size,
                     std::pair<double, double> lp_range, int n_bags,
                     RngState& rng) {
  data.validate();
  if (bag_size < 1 || n_bags < 1) {
    throw Error(ErrorCode::bad_config, "bag_size and n_bags must be >= 1");
  }
  if (data.Y.cols() != 2) {
    throw Error(ErrorCode::label_shape_mismatch,
                "make_bags expects binary one-hot labels (two columns)");
  }
  if (!(lp_range.first >= 0.0 && lp_range.second <= 1.0 &&
        lp_range.first <= lp_range.second)) {
    throw Error(ErrorCode::bad_config, "lp_range must be within [0, 1]");
  }

  std::vector<Eigen::Index> neg_idx, pos_idx;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    (data.Y(i, 1) > 0.5 ? pos_idx : neg_idx).push_back(i);
  }
  ReplenishingPool neg_pool(std::move(neg_idx), rng);
  ReplenishingPool pos_pool(std::move(pos_idx), rng);

  BagDataset out;
  out.bags.reserve(static_cast<std::size_t>(n_bags));
  out.proportions.resize(n_bags, 2);
  for (int b = 0; b < n_bags; ++b) {
    double lp = lp_range.first + (lp_range.second - lp_range.first) * rng.next_double();
    // Nearest count, ties toward more positives.
    int n_pos = static_cast<int>(std::floor(lp * bag_size + 0.5));
    int n_neg = bag_size - n_pos;
    if (n_pos > pos_pool.size() || n_neg > neg_pool.size()) {
      throw Error(ErrorCode::insufficient_class_instances,
                  "a class has fewer instances than one bag requires");
    }
    std::unordered_set<Eigen::Index> in_bag;
    std::vector<Eigen::Index> members;
    members.reserve(static_cast<std::size_t>(bag_size));
    for (int i = 0; i < n_pos; ++i) {
      Eigen::Index idx = pos_pool.draw(in_bag);
      in_bag.insert(idx);
      members.push_back(idx);
    }
    for (int i = 0; i < n_neg; ++i) {
      Eigen::Index idx = neg_pool.draw(in_bag);
      in_bag.insert(idx);
      members.push_back(idx);
    }
    out.bags.push_back(take_rows(data.X, members));
    double realized = static_cast<double>(n_pos) / static_cast<double>(bag_size);
    out.proportions(b, 0) = 1.0 - realized;
    out.proportions(b, 1) = realized;
  }
  return out;
}

}  // namespace kdm
