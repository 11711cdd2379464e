#include "epmix/hyper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "epmix/exp_power.hpp"

namespace epmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Half-width of the searched box in log coordinates around the data scales.
constexpr double kLogBox = 40.0;

}  // namespace

EvidenceObjective::EvidenceObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool half_quadratic)
    : half_quadratic_(half_quadratic) {
  if (X.rows() != y.size()) throw std::invalid_argument("design rows must match response length");
  const Eigen::MatrixXd gram = X * X.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition of XX' failed");
  // XX' is positive semidefinite; clip rounding noise below zero.
  eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  projections_sq_ = (eig.eigenvectors().transpose() * y).array().square();
}

double EvidenceObjective::operator()(double sigma2, double tau2) const {
  const Eigen::ArrayXd d = tau2 * eigenvalues_.array() + sigma2;
  const double quad = (projections_sq_.array() / d).sum();
  return 0.5 * d.log().sum() + (half_quadratic_ ? 0.5 : 1.0) * quad;
}

double evidence_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double sigma2, double tau2,
                          bool half_quadratic) {
  if (!(sigma2 > 0.0) || !(tau2 > 0.0)) throw std::domain_error("variances must be positive");
  return EvidenceObjective(y, X, half_quadratic)(sigma2, tau2);
}

NelderMeadResult nelder_mead_2d(const std::function<double(const Eigen::Vector2d&)>& f, const Eigen::Vector2d& start,
                                double step, double ftol, int max_iter) {
  std::array<Eigen::Vector2d, 3> pts{start, start + Eigen::Vector2d(step, 0.0), start + Eigen::Vector2d(0.0, step)};
  std::array<double, 3> val{};
  for (int i = 0; i < 3; ++i) val[i] = f(pts[i]);

  NelderMeadResult res;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    const double scale = std::max(1.0, std::abs(val[best]));
    if (std::isfinite(val[worst]) && val[worst] - val[best] <= ftol * scale) {
      res.converged = true;
      break;
    }
    const Eigen::Vector2d centroid = 0.5 * (pts[best] + pts[mid]);
    const Eigen::Vector2d reflected = centroid + (centroid - pts[worst]);
    const double f_r = f(reflected);
    if (f_r < val[best]) {
      const Eigen::Vector2d expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double f_e = f(expanded);
      if (f_e < f_r) {
        pts[worst] = expanded;
        val[worst] = f_e;
      } else {
        pts[worst] = reflected;
        val[worst] = f_r;
      }
      continue;
    }
    if (f_r < val[mid]) {
      pts[worst] = reflected;
      val[worst] = f_r;
      continue;
    }
    const bool outside = f_r < val[worst];
    const Eigen::Vector2d contracted =
        outside ? Eigen::Vector2d(centroid + 0.5 * (reflected - centroid)) : Eigen::Vector2d(centroid + 0.5 * (pts[worst] - centroid));
    const double f_c = f(contracted);
    if (f_c < (outside ? f_r : val[worst])) {
      pts[worst] = contracted;
      val[worst] = f_c;
      continue;
    }
    for (int i : {mid, worst}) {
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = f(pts[i]);
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  res.value = *it;
  res.x = pts[static_cast<std::size_t>(it - val.begin())];
  return res;
}

EvidenceFit fit_sigma2_tau2(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool half_quadratic) {
  const auto m = y.size();
  if (m < 2) throw std::invalid_argument("evidence fitting needs at least two observations");
  const EvidenceObjective objective(y, X, half_quadratic);

  double scale_sigma = y.squaredNorm() / static_cast<double>(m);
  if (!(scale_sigma > 0.0)) scale_sigma = 1.0;
  const double col_power = X.squaredNorm() / static_cast<double>(m);
  const double scale_tau = col_power > 0.0 ? scale_sigma / col_power : scale_sigma;
  const Eigen::Vector2d center(std::log(scale_sigma), std::log(scale_tau));
  const Eigen::Vector2d lower = center.array() - kLogBox;
  const Eigen::Vector2d upper = center.array() + kLogBox;

  auto f = [&](const Eigen::Vector2d& x) {
    if ((x.array() < lower.array()).any() || (x.array() > upper.array()).any()) return kInf;
    const double v = objective(std::exp(x[0]), std::exp(x[1]));
    return std::isfinite(v) ? v : kInf;
  };

  EvidenceFit fit;
  NelderMeadResult best;
  best.value = kInf;
  std::ostringstream failures;
  for (double fs : {0.1, 0.5, 0.9}) {
    for (double ft : {0.1, 1.0, 10.0}) {
      const Eigen::Vector2d start(center[0] + std::log(fs), center[1] + std::log(ft));
      fit.starts.push_back(start);
      fit.start_objectives.push_back(f(start));
      const NelderMeadResult r = nelder_mead_2d(f, start);
      if (!r.converged) {
        failures << " start(" << start[0] << "," << start[1] << ") value " << r.value << ";";
        continue;
      }
      ++fit.converged_starts;
      if (r.value < best.value) best = r;
    }
  }
  if (fit.converged_starts == 0) {
    throw std::runtime_error("evidence optimization failed from every start:" + failures.str());
  }
  fit.sigma2 = std::exp(best.x[0]);
  fit.tau2 = std::exp(best.x[1]);
  fit.objective = best.value;
  fit.sigma2_at_boundary = best.x[0] - lower[0] < 1.0 || upper[0] - best.x[0] < 1.0;
  fit.tau2_at_boundary = best.x[1] - lower[1] < 1.0 || upper[1] - best.x[1] < 1.0;
  return fit;
}

std::vector<ThetaPoint> build_theta_grid(double sigma2_hat, double tau2_hat) {
  if (!(sigma2_hat > 0.0) || !(tau2_hat > 0.0)) throw std::domain_error("grid needs positive variances");
  std::vector<ThetaPoint> grid;
  for (int k = 1; k <= 9; ++k) {
    const double q = 2.0 * k / 10.0;
    grid.push_back({sigma2_hat, lambda_for_variance(q, tau2_hat), q});
  }
  return grid;
}

}  // namespace epmix
