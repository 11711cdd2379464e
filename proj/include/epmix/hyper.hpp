#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace epmix {

struct ThetaPoint {
  double sigma2 = 1.0;
  double lambda = 1.0;
  double q = 1.0;
};

/// log|XX' tau2 + I sigma2| / 2 + y'(XX' tau2 + I sigma2)^{-1} y, evaluated
/// through a one-time eigendecomposition of XX'. With `half_quadratic` the
/// quadratic form carries the 1/2 of a Gaussian log likelihood.
class EvidenceObjective {
 public:
  EvidenceObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool half_quadratic = true);

  double operator()(double sigma2, double tau2) const;

  std::size_t m() const { return static_cast<std::size_t>(eigenvalues_.size()); }
  bool half_quadratic() const { return half_quadratic_; }

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd projections_sq_;  // (u_i' y)^2
  bool half_quadratic_;
};

double evidence_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double sigma2, double tau2,
                          bool half_quadratic = true);

struct NelderMeadResult {
  Eigen::Vector2d x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Plain 2-D Nelder–Mead. Converged when the spread of simplex values falls
/// to `ftol` (absolute, scaled by max(1, |f|)).
NelderMeadResult nelder_mead_2d(const std::function<double(const Eigen::Vector2d&)>& f, const Eigen::Vector2d& start,
                                double step = 0.5, double ftol = 1e-10, int max_iter = 20000);

struct EvidenceFit {
  double sigma2 = 0.0;
  double tau2 = 0.0;
  double objective = 0.0;
  bool tau2_at_boundary = false;
  bool sigma2_at_boundary = false;
  int converged_starts = 0;
  std::vector<Eigen::Vector2d> starts;  // (log sigma2, log tau2)
  std::vector<double> start_objectives;
};

/// Minimizes the evidence objective over (log sigma2, log tau2) from nine
/// starts spread over a 3x3 grid; returns the best converged run.
EvidenceFit fit_sigma2_tau2(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool half_quadratic = true);

/// q = 2k/10 for k = 1..9, each with the rate fixing the prior variance to
/// tau2_hat.
std::vector<ThetaPoint> build_theta_grid(double sigma2_hat, double tau2_hat);

}  // namespace epmix
