// Acceptance checks, one PASS/FAIL line each. Usage: epmix_acceptance [id...]
// (no ids runs everything). Exit status is the number of failed checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "epmix/dataset.hpp"
#include "epmix/diagnostics.hpp"
#include "epmix/exp_power.hpp"
#include "epmix/experiment.hpp"
#include "epmix/hyper.hpp"
#include "epmix/mixture.hpp"
#include "epmix/nuts.hpp"
#include "oracles.hpp"

using namespace epmix;
using namespace epmix::testing;

namespace {

const double kGridQ[] = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8};
const Parametrization kParams[] = {Parametrization::naive, Parametrization::centered, Parametrization::noncentered};

int failures = 0;

void report(int id, bool pass, const std::string& detail, double seconds) {
  std::printf("%s criterion %d: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, detail.c_str(), seconds);
  std::fflush(stdout);
  failures += !pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

// Mixture identity over the full (q, lambda) grid.
void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 50000;
  const double alpha = 0.01 / 27.0;
  double worst = 1.0;
  std::string where;
  std::uint64_t stream = 0;
  for (double q : kGridQ) {
    for (double lam : {0.5, 1.0, 4.0}) {
      const ExpPowerParams ep(q, lam);
      Rng a(101, {++stream, 1}), b(101, {stream, 2});
      const auto mix = compose_ep_sample(ep, n, a);
      const auto ref = ep_sample(ep, n, b);
      const double p = ks_two_sample_pvalue(ks_two_sample_statistic(mix, ref), n, n);
      if (p < worst) {
        worst = p;
        where = "q=" + fmt("%g", q) + " lambda=" + fmt("%g", lam);
      }
    }
  }
  report(1, worst > alpha,
         "mixture vs direct EP sampling, 27 KS tests, min p " + fmt("%.3g", worst) + " at " + where +
             ", threshold " + fmt("%.3g", alpha),
         seconds_since(t0));
}

// Laplace and normal reductions plus the q = 1 angular density.
void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 50000;
  Rng a(202, {1}), b(202, {2});
  const auto lap = compose_ep_sample({1.0, 1.0}, n, a);
  const double p_lap = ks_pvalue(ks_statistic(lap, [](double x) { return laplace_cdf(x, 1.0); }), n);
  // exp(-z^2) is N(0, 1/2)
  const auto gauss = ep_sample({2.0, 1.0}, n, b);
  const double p_norm =
      ks_pvalue(ks_statistic(gauss, [](double x) { return normal_cdf(x * std::numbers::sqrt2); }), n);
  double max_err = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double d = std::numbers::pi * i / 1001.0;
    max_err = std::max(max_err, std::abs(std::exp(zolotarev_logpdf(d, 1.0)) - std::cos(d / 2) / 2));
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  const double mass = ts.integrate([](double d) { return std::cos(d / 2) / 2; }, 0.0, std::numbers::pi);
  const bool pass = p_lap > 0.01 && p_norm > 0.01 && max_err < 1e-10 && std::abs(mass - 1) < 1e-12;
  report(2, pass,
         "Laplace KS p " + fmt("%.3g", p_lap) + ", normal KS p " + fmt("%.3g", p_norm) +
             ", |density - cos(d/2)/2| max " + fmt("%.2g", max_err) + ", reference mass " + fmt("%.15g", mass),
         seconds_since(t0));
}

// Analytic gradients against central differences.
void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = make_synthetic_regression(30, 3, 303);
  const RegressionProblem prob(data.y, data.X, 1.0);
  double worst = 0.0;
  std::string where;
  Rng rng(303);
  for (double q : {0.2, 0.6, 1.0, 1.4, 1.8}) {
    for (Parametrization p : kParams) {
      const auto t = TargetSpec::regression(prob, {q, 1.0}, p);
      for (int i = 0; i < 100; ++i) {
        const double e = gradient_error(t, random_state(p, 3, q, rng));
        if (!(e <= worst)) {
          worst = e;
          where = "q=" + fmt("%g", q) + " " + std::string(to_string(p));
        }
      }
    }
  }
  report(3, worst < 1e-5, "1500 points, max relative gradient error " + fmt("%.3g", worst) + " at " + where,
         seconds_since(t0));
}

// Same evidence under every parametrization; angular density normalized.
void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd y(1);
  y << 0.7;
  Eigen::MatrixXd X(1, 1);
  X << 1.3;
  const RegressionProblem prob(y, X, 0.8);
  double worst_ev = 0.0;
  for (double q : {0.6, 1.0, 1.4}) {
    const ExpPowerParams ep(q, 1.1);
    const double naive = quadrature_evidence(TargetSpec::regression(prob, ep, Parametrization::naive));
    for (Parametrization p : {Parametrization::centered, Parametrization::noncentered}) {
      worst_ev = std::max(worst_ev, std::abs(quadrature_evidence(TargetSpec::regression(prob, ep, p)) / naive - 1));
    }
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  double worst_mass = 0.0;
  for (double q : kGridQ) {
    const double mass = ts.integrate([q](double d) { return std::exp(zolotarev_logpdf(d, q)); }, 0.0, std::numbers::pi);
    worst_mass = std::max(worst_mass, std::abs(mass - 1));
  }
  report(4, worst_ev < 1e-4 && worst_mass < 1e-6,
         "evidence max relative spread " + fmt("%.3g", worst_ev) + " (q 0.6, 1.0, 1.4), angular density mass error " +
             fmt("%.3g", worst_mass),
         seconds_since(t0));
}

// Conjugate q = 2 check against the closed-form ridge posterior.
void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = make_synthetic_regression(50, 8, 505);
  const RegressionProblem prob(data.y, data.X, 1.0);
  const double lambda = 0.5;
  const auto t = TargetSpec::regression(prob, {2.0, lambda}, Parametrization::naive);
  const auto post = ridge_posterior(prob.y, prob.X, prob.sigma2, lambda);
  SamplerConfig cfg;
  cfg.seed = 505;
  cfg.chains = 10;
  std::vector<ChainDraws> chains;
  for (std::uint64_t c = 0; c < 10; ++c) chains.push_back(nuts_sample(t, cfg, std::nullopt, c));
  double worst = 0.0;
  std::string where;
  for (int j = 0; j < 8; ++j) {
    // pooled mean and variance; MCSE from per-chain ESS summed over chains
    std::vector<double> all;
    for (const auto& ch : chains) all.insert(all.end(), ch.z2_draws.col(j).data(), ch.z2_draws.col(j).data() + ch.z2_draws.rows());
    const double mean = sample_mean(all);
    double ess_mean = 0.0, ess_sq = 0.0;
    std::vector<double> sq(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) sq[i] = (all[i] - post.mean[j]) * (all[i] - post.mean[j]);
    const std::size_t per = all.size() / chains.size();
    for (std::size_t c = 0; c < chains.size(); ++c) {
      ess_mean += ess({all.data() + c * per, per}).ess;
      ess_sq += ess({sq.data() + c * per, per}).ess;
    }
    const double var_hat = sample_mean(sq);
    const double z_mean = std::abs(mean - post.mean[j]) / std::sqrt(post.cov(j, j) / ess_mean);
    const double z_var = std::abs(var_hat - post.cov(j, j)) / std::sqrt(sample_variance(sq) / ess_sq);
    if (z_mean > worst) {
      worst = z_mean;
      where = "mean of z" + std::to_string(j);
    }
    if (z_var > worst) {
      worst = z_var;
      where = "variance of z" + std::to_string(j);
    }
  }
  report(5, worst < 3.0, "10 chains x 1000 draws, largest deviation " + fmt("%.2f", worst) + " MCSE (" + where + ")",
         seconds_since(t0));
}

struct ProtocolRun {
  ExperimentReport first;
  std::string first_csv, second_csv;
  double seconds = 0.0;
};

std::string strip_wall_time(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    out << line.substr(0, prev) << line.substr(last) << '\n';
  }
  return out.str();
}

std::vector<double> column(const ExperimentReport& r, double q, Parametrization p, double SummaryRow::*field) {
  std::vector<double> out;
  for (const auto& row : r.summary) {
    if (row.status == "ok" && std::abs(row.q - q) < 1e-9 && row.parametrization == p) out.push_back(row.*field);
  }
  return out;
}

// Default protocol on the bundled m = 60, n2 = 8 data, run twice.
ProtocolRun run_protocol(bool twice) {
  ProtocolRun out;
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.dataset_path = std::string(EPMIX_DATA_DIR) + "/synthetic_m60_n8.csv";
  cfg.sampler.seed = 20240229;
  out.first = run_experiment(cfg);
  out.first_csv = strip_wall_time(summary_csv(out.first.summary));
  if (twice) out.second_csv = strip_wall_time(summary_csv(run_experiment(cfg).summary));
  out.seconds = seconds_since(t0);
  return out;
}

void criterion6(const ProtocolRun& run) {
  const auto& r = run.first;
  const double non = median(column(r, 0.4, Parametrization::noncentered, &SummaryRow::min_ess));
  const double cen = median(column(r, 0.4, Parametrization::centered, &SummaryRow::min_ess));
  const double nai = median(column(r, 0.4, Parametrization::naive, &SummaryRow::min_ess));
  const double sd_non = sd(column(r, 0.4, Parametrization::noncentered, &SummaryRow::mean_log_summary));
  const double sd_nai = sd(column(r, 0.4, Parametrization::naive, &SummaryRow::mean_log_summary));
  const double nai18 = median(column(r, 1.8, Parametrization::naive, &SummaryRow::min_ess));
  const double non18 = median(column(r, 1.8, Parametrization::noncentered, &SummaryRow::min_ess));
  const bool pass = non > 5 * cen && non > 5 * nai && sd_non < sd_nai / 3 && nai18 > non18;
  report(6, pass,
         "q=0.4 median min-ESS noncentered " + fmt("%.1f", non) + " vs centered " + fmt("%.1f", cen) + " and naive " +
             fmt("%.1f", nai) + " (need > 5x); sd ratio noncentered/naive " + fmt("%.3f", sd_non / sd_nai) +
             " (need < 1/3); q=1.8 naive " + fmt("%.1f", nai18) + " vs noncentered " + fmt("%.1f", non18),
         run.seconds);
}

void criterion7(const ProtocolRun& run) {
  std::size_t cen = 0, non = 0, naive = 0;
  for (const auto& row : run.first.summary) {
    if (row.status != "ok") continue;
    if (row.parametrization == Parametrization::naive) naive += row.divergences;
    if (row.q > 0.6 + 1e-9) continue;
    if (row.parametrization == Parametrization::centered) cen += row.divergences;
    if (row.parametrization == Parametrization::noncentered) non += row.divergences;
  }
  report(7, cen > non && naive == 0,
         "q<=0.6 divergences centered " + std::to_string(cen) + " vs noncentered " + std::to_string(non) +
             "; naive total " + std::to_string(naive) + " (need 0)",
         0.0);
}

// Evidence recovery and grid variances.
void criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = 500, n = 8;
  Rng rng(808);
  Eigen::MatrixXd X(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) X(i, j) = rng.normal();
  }
  Eigen::VectorXd z(n);
  for (auto& v : z) v = rng.normal();
  z *= std::sqrt(4.0 * n / z.squaredNorm());  // mean square exactly tau2 = 4
  Eigen::VectorXd y = X * z;
  for (auto& v : y) v += rng.normal();
  const auto fit = fit_sigma2_tau2(y, X);
  double worst_var = 0.0;
  for (const auto& th : build_theta_grid(fit.sigma2, fit.tau2)) {
    worst_var = std::max(worst_var, std::abs(ep_variance({th.q, th.lambda}) / fit.tau2 - 1));
  }
  const bool pass = std::abs(fit.sigma2 - 1) < 0.25 && std::abs(fit.tau2 / 4 - 1) < 0.25 && worst_var < 1e-10;
  report(8, pass,
         "sigma2 hat " + fmt("%.4f", fit.sigma2) + " (truth 1), tau2 hat " + fmt("%.4f", fit.tau2) +
             " (truth 4), grid variance relative error " + fmt("%.2g", worst_var),
         seconds_since(t0));
}

// ESS and R-hat calibration.
void criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  const double phi = 0.9;
  const std::size_t n = 10000;
  Rng rng(909);
  std::vector<double> x(n);
  double prev = rng.normal() / std::sqrt(1 - phi * phi);
  for (auto& v : x) v = prev = phi * prev + rng.normal();
  const double expected = n * (1 - phi) / (1 + phi);
  const double e = ess(x).ess;

  std::vector<std::vector<double>> iid(4, std::vector<double>(1000)), sep(2, std::vector<double>(1000));
  for (auto& c : iid) {
    for (auto& v : c) v = rng.normal();
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (auto& v : sep[c]) v = rng.normal() + 5.0 * static_cast<double>(c);
  }
  const double r_iid = split_rhat({iid.begin(), iid.end()}).rhat;
  const double r_sep = split_rhat({sep.begin(), sep.end()}).rhat;
  const bool pass = std::abs(e / expected - 1) <= 0.2 && std::abs(r_iid - 1) < 0.05 && r_sep > 1.1;
  report(9, pass,
         "AR(1) ESS " + fmt("%.1f", e) + " vs " + fmt("%.1f", expected) + ", iid R-hat " + fmt("%.4f", r_iid) +
             ", separated R-hat " + fmt("%.3f", r_sep),
         seconds_since(t0));
}

void criterion10(const ProtocolRun& run) {
  const bool same = !run.first_csv.empty() && run.first_csv == run.second_csv;
  report(10, same,
         std::string(same ? "two" : "two differing") + " full runs, " + std::to_string(run.first.summary.size()) +
             " summary rows compared without wall time",
         0.0);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> ids;
  for (int i = 1; i < argc; ++i) ids.insert(std::atoi(argv[i]));
  auto want = [&](int id) { return ids.empty() || ids.count(id); };
  try {
    if (want(1)) criterion1();
    if (want(2)) criterion2();
    if (want(3)) criterion3();
    if (want(4)) criterion4();
    if (want(5)) criterion5();
    if (want(6) || want(7) || want(10)) {
      const auto run = run_protocol(want(10));
      if (want(6)) criterion6(run);
      if (want(7)) criterion7(run);
      if (want(10)) criterion10(run);
    }
    if (want(8)) criterion8();
    if (want(9)) criterion9();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  return failures;
}
