#include "magictrap/lsq.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace magictrap::lsq {

namespace {

struct Evaluation {
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double chi2 = std::numeric_limits<double>::infinity();
  bool valid = false;
};

Evaluation evaluate(const Model& model, const Eigen::VectorXd& x) {
  Evaluation e;
  e.valid = model(x, e.residuals, e.jacobian);
  if (e.valid) {
    e.chi2 = e.residuals.squaredNorm();
    e.valid = std::isfinite(e.chi2) && e.jacobian.allFinite();
  }
  return e;
}

}  // namespace

Solution levenberg_marquardt(const Model& model, Eigen::VectorXd x0, const Eigen::VectorXd& scale,
                             const Options& options) {
  const Eigen::Index n = x0.size();
  if (scale.size() != n || (scale.array() <= 0.0).any()) {
    throw std::invalid_argument("levenberg_marquardt: scale must be positive, one entry per parameter");
  }

  Evaluation current = evaluate(model, x0);
  if (!current.valid) {
    throw std::invalid_argument("levenberg_marquardt: initial point outside model domain");
  }

  Solution out;
  Eigen::VectorXd x = std::move(x0);
  double lambda = options.initial_lambda;

  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    const Eigen::MatrixXd jz = current.jacobian * scale.asDiagonal();
    const Eigen::VectorXd gradient = jz.transpose() * current.residuals;
    if (gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd hessian = jz.transpose() * jz;
    Eigen::VectorXd diag = hessian.diagonal().cwiseMax(1e-12 * hessian.diagonal().maxCoeff());
    if (!(diag.array() > 0.0).all()) diag.setOnes();

    Eigen::MatrixXd damped = hessian;
    damped.diagonal() += lambda * diag;
    const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
    const Eigen::VectorXd z = x.cwiseQuotient(scale);
    const bool tiny_step = step.norm() <= options.step_tolerance * (z.norm() + options.step_tolerance);

    const Eigen::VectorXd candidate = x + scale.cwiseProduct(step);
    Evaluation trial = evaluate(model, candidate);
    if (trial.valid && trial.chi2 <= current.chi2) {
      x = candidate;
      current = std::move(trial);
      lambda = std::max(lambda / 10.0, 1e-15);
      if (tiny_step) {
        out.converged = true;
        ++out.iterations;
        break;
      }
    } else {
      if (tiny_step) {
        // No representable improvement left.
        out.converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e20) break;
    }
  }

  out.x = x;
  out.residuals = current.residuals;
  out.chi2 = current.chi2;

  const Eigen::MatrixXd jz = current.jacobian * scale.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jz, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  out.rank = svd.rank();
  Eigen::VectorXd inv_sq = Eigen::VectorXd::Zero(svd.singularValues().size());
  for (Eigen::Index i = 0; i < out.rank; ++i) {
    const double s = svd.singularValues()(i);
    inv_sq(i) = 1.0 / (s * s);
  }
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::MatrixXd cov_z = v * inv_sq.asDiagonal() * v.transpose();
  out.covariance = scale.asDiagonal() * cov_z * scale.asDiagonal();
  return out;
}

}  // namespace magictrap::lsq
