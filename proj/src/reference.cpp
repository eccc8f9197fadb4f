#include "kdm/reference.hpp"

#include "kdm/inference.hpp"

namespace kdm::reference {

Eigen::MatrixXd gram_sq(const KernelSpec& k, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd out(X.rows(), Y.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      out(i, j) = eval_sq(k, X.row(i).transpose(), Y.row(j).transpose());
    }
  }
  return out;
}

Eigen::VectorXd infer_weights(const KernelDensityMatrix& rho_x,
                              const JointKDM& joint) {
  const Eigen::Index m = rho_x.num_components();
  const Eigen::Index mp = joint.num_components();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mp);
  for (Eigen::Index l = 0; l < m; ++l) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < mp; ++j) {
      denom += joint.weights()[j] *
               eval_sq(joint.x_kernel(), rho_x.components().row(l).transpose(),
                       joint.x_components().row(j).transpose());
    }
    if (denom < kDegenerateDenominator) {
      out += rho_x.weights()[l] * joint.weights();
      continue;
    }
    for (Eigen::Index i = 0; i < mp; ++i) {
      double num = joint.weights()[i] *
                   eval_sq(joint.x_kernel(), rho_x.components().row(l).transpose(),
                           joint.x_components().row(i).transpose());
      out[i] += rho_x.weights()[l] * num / denom;
    }
  }
  return out;
}

double density(const KernelDensityMatrix& rho, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rho.num_components(); ++i) {
    acc += rho.weights()[i] *
           eval_sq(rho.kernel(), x, rho.components().row(i).transpose());
  }
  return norm_const(rho.kernel()) * acc;
}

Eigen::VectorXd density_many(const KernelDensityMatrix& rho,
                             const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[i] = density(rho, X.row(i).transpose());
  }
  return out;
}

}  // namespace kdm::reference
