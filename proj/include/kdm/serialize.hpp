#pragma once

#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "kdm/kdm.hpp"

namespace kdm {

nlohmann::json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);

nlohmann::json kdm_to_json(const KernelDensityMatrix& rho);
KernelDensityMatrix kdm_from_json(const nlohmann::json& j);

nlohmann::json joint_to_json(const JointKDM& joint);
JointKDM joint_from_json(const nlohmann::json& j);

/// A model file holds either a KDM or a JointKDM (recognized by its keys).
struct Model {
  enum class Type { kdm, joint } type;
  std::unique_ptr<KernelDensityMatrix> kdm;
  std::unique_ptr<JointKDM> joint;

  static Model from_kdm(KernelDensityMatrix rho);
  static Model from_joint(JointKDM joint);
};

void save_model_file(const Model& model, const std::string& path);
Model load_model_file(const std::string& path);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace kdm
