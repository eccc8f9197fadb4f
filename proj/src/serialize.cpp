#include "kdm/serialize.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace kdm {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::parse_error, "expected a non-empty array of rows");
  }
  Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::parse_error, "ragged matrix rows in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

json kernel_to_json(const KernelSpec& k) {
  json j;
  j["kind"] = kernel_kind_name(k.kind());
  j["dim"] = k.dim();
  if (k.is_rbf()) {
    j["sigma"] = k.sigma();
  } else if (k.is_product()) {
    j["factors"] = json::array({kernel_to_json(k.factor_x()), kernel_to_json(k.factor_y())});
  }
  return j;
}

KernelSpec kernel_from_json(const json& j) {
  try {
    KernelKind kind = kernel_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
      case KernelKind::cosine:
        return KernelSpec::cosine(j.at("dim").get<int>());
      case KernelKind::rbf:
        return KernelSpec::rbf(j.at("dim").get<int>(), j.at("sigma").get<double>());
      case KernelKind::product: {
        const json& f = j.at("factors");
        if (!f.is_array() || f.size() != 2) {
          throw Error(ErrorCode::parse_error, "product kernel needs exactly two factors");
        }
        return KernelSpec::product(kernel_from_json(f.at(0)), kernel_from_json(f.at(1)));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("kernel JSON: ") + e.what());
  }
  throw Error(ErrorCode::parse_error, "unreachable kernel kind");
}

json kdm_to_json(const KernelDensityMatrix& rho) {
  json j;
  j["components"] = matrix_to_json(rho.components());
  j["weights"] = vector_to_json(rho.weights());
  j["kernel"] = kernel_to_json(rho.kernel());
  return j;
}

KernelDensityMatrix kdm_from_json(const json& j) {
  try {
    return KernelDensityMatrix(matrix_from_json(j.at("components")),
                               vector_from_json(j.at("weights")),
                               kernel_from_json(j.at("kernel")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("KDM JSON: ") + e.what());
  }
}

json joint_to_json(const JointKDM& joint) {
  json j;
  j["x_components"] = matrix_to_json(joint.x_components());
  j["y_components"] = matrix_to_json(joint.y_components());
  j["weights"] = vector_to_json(joint.weights());
  j["x_kernel"] = kernel_to_json(joint.x_kernel());
  j["y_kernel"] = kernel_to_json(joint.y_kernel());
  return j;
}

JointKDM joint_from_json(const json& j) {
  try {
    return JointKDM(matrix_from_json(j.at("x_components")),
                    matrix_from_json(j.at("y_components")),
                    vector_from_json(j.at("weights")),
                    kernel_from_json(j.at("x_kernel")),
                    kernel_from_json(j.at("y_kernel")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("joint KDM JSON: ") + e.what());
  }
}

Model Model::from_kdm(KernelDensityMatrix rho) {
  Model m{Type::kdm, std::make_unique<KernelDensityMatrix>(std::move(rho)), nullptr};
  return m;
}

Model Model::from_joint(JointKDM joint) {
  Model m{Type::joint, nullptr, std::make_unique<JointKDM>(std::move(joint))};
  return m;
}

void save_model_file(const Model& model, const std::string& path) {
  json j = model.type == Model::Type::kdm ? kdm_to_json(*model.kdm)
                                          : joint_to_json(*model.joint);
  save_json_file(j, path);
}

Model load_model_file(const std::string& path) {
  json j = load_json_file(path);
  if (j.contains("x_components")) return Model::from_joint(joint_from_json(j));
  return Model::from_kdm(kdm_from_json(j));
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open '" + path + "' for reading");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
}

void save_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  }
  out << j.dump() << "\n";
}

}  // namespace kdm
