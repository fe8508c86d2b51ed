#pragma once

#include <functional>

#include <Eigen/Dense>

namespace magictrap::lsq {

/// Damped Gauss-Newton with Marquardt diagonal scaling.
struct Options {
  int max_iterations = 200;
  double step_tolerance = 1e-10;      // relative, in scaled parameters
  double gradient_tolerance = 1e-12;  // infinity norm of J^T r, scaled parameters
  double initial_lambda = 1e-3;
};

/// Fills weighted residuals r = (model - data) / sigma and their Jacobian
/// dr/dx at x. Returns false when x lies outside the model's domain; the
/// solver then treats the step as rejected.
using Model = std::function<bool(const Eigen::VectorXd& x, Eigen::VectorXd& residuals,
                                 Eigen::MatrixXd& jacobian)>;

struct Solution {
  Eigen::VectorXd x;
  Eigen::MatrixXd covariance;  // (J^T J)^+ , not scaled by reduced chi-square
  Eigen::VectorXd residuals;
  double chi2 = 0.0;
  Eigen::Index rank = 0;
  int iterations = 0;
  bool converged = false;
};

/// `scale` holds characteristic parameter magnitudes; the iteration runs on
/// x / scale so that badly mixed units stay well conditioned.
Solution levenberg_marquardt(const Model& model, Eigen::VectorXd x0, const Eigen::VectorXd& scale,
                             const Options& options = {});

}  // namespace magictrap::lsq
