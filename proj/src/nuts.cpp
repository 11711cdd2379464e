#include "epmix/nuts.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "epmix/random.hpp"

namespace epmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;  // d log p / dq
  double log_p = -kInf;
};

class DualAveraging {
 public:
  DualAveraging(double delta, double gamma, double t0, double kappa)
      : delta_(delta), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat) {
    counter_ += 1.0;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  double delta_, gamma_, t0_, kappa_;
  double mu_ = 0.0;
  double counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
};

/// Fast/slow/fast warmup windows and a Welford variance accumulator.
class WindowedVariance {
 public:
  WindowedVariance(std::size_t dim, std::size_t num_warmup, std::size_t init_buffer, std::size_t term_buffer,
                   std::size_t base_window)
      : num_warmup_(num_warmup), mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {
    if (num_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer + base_window + term_buffer > num_warmup) {
      init_buffer = static_cast<std::size_t>(0.15 * num_warmup);
      term_buffer = static_cast<std::size_t>(0.1 * num_warmup);
      base_window = num_warmup - (init_buffer + term_buffer);
    }
    init_buffer_ = init_buffer;
    term_buffer_ = term_buffer;
    window_size_ = base_window;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Feeds one warmup draw; returns true when `inv_metric` was refreshed.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (counter_ == next_window_ && counter_ != num_warmup_) {
      advance_window();
      const double n = static_cast<double>(count_);
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      count_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  void add(const Eigen::VectorXd& q) {
    ++count_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(q - mean_);
  }
  void advance_window() {
    const std::size_t last = num_warmup_ - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != last) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_) next_window_ = last;
    }
  }

  bool enabled_ = true;
  std::size_t num_warmup_;
  std::size_t init_buffer_ = 0, term_buffer_ = 0, window_size_ = 0, next_window_ = 0;
  std::size_t counter_ = 0;
  std::size_t count_ = 0;
  Eigen::VectorXd mean_, m2_;
};

class Nuts {
 public:
  Nuts(const LogDensityFn& f, std::size_t dim, const SamplerConfig& config, Rng& rng)
      : f_(f), dim_(dim), config_(config), rng_(rng), inv_metric_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))) {}

  void evaluate(PhasePoint& z) const {
    z.log_p = f_({z.q.data(), dim_}, {z.grad.data(), dim_});
    if (std::isnan(z.log_p)) z.log_p = -kInf;
  }

  double hamiltonian(const PhasePoint& z) const {
    if (!std::isfinite(z.log_p)) return kInf;
    const double h = -z.log_p + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    return std::isnan(h) ? kInf : h;
  }

  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    z.p += 0.5 * eps * z.grad;
  }

  /// Step-size doubling/halving heuristic around a one-step acceptance of 0.8.
  void init_step_size(PhasePoint& z) {
    const PhasePoint start = z;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    leapfrog(z, eps_);
    double delta_h = h0 - hamiltonian(z);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (;;) {
      z = start;
      sample_momentum(z);
      h0 = hamiltonian(z);
      leapfrog(z, eps_);
      delta_h = h0 - hamiltonian(z);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw std::runtime_error("step size diverged upward; posterior may be improper");
      if (eps_ == 0.0) throw std::runtime_error("step size collapsed to zero; no acceptable step found");
    }
    z = start;
  }

  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    double max_energy_error = -kInf;
    bool divergent = false;
  };

  Transition transition(PhasePoint& current) {
    Transition info;
    PhasePoint z = current;
    sample_momentum(z);
    divergent_ = false;
    max_energy_error_ = -kInf;

    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    Eigen::VectorXd p_sharp_fwd_fwd = inv_metric_.cwiseProduct(z.p);
    Eigen::VectorXd p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Eigen::VectorXd p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Eigen::VectorXd p_sharp_bck_bck = p_sharp_fwd_fwd;
    Eigen::VectorXd p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
    Eigen::VectorXd rho = z.p;
    const Eigen::Index d = z.p.size();

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    int depth = 0;

    while (depth < config_.max_tree_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(d);
      bool valid_subtree = false;
      double log_sum_weight_subtree = -kInf;

      if (rng_.uniform() > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                   p_fwd_fwd, h0, eps_, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                   p_bck_bck, h0, -eps_, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = z;
      }
      if (!valid_subtree) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (rng_.uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    info.depth = depth;
    info.n_leapfrog = n_leapfrog;
    info.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    info.divergent = divergent_;
    info.max_energy_error = max_energy_error_;
    current = z_sample;
    return info;
  }

  double step_size() const { return eps_; }
  void set_step_size(double eps) { eps_ = eps; }
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

 private:
  static bool no_u_turn(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                  Eigen::VectorXd& p_end, double h0, double eps, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(z, eps);
      ++n_leapfrog;
      const double h = hamiltonian(z);
      const double err = h - h0;
      max_energy_error_ = std::max(max_energy_error_, std::isnan(err) ? kInf : err);
      if (err > config_.divergence_threshold || std::isnan(err)) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = inv_metric_.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    const Eigen::Index d = z.p.size();
    // initial subtree
    double log_sum_weight_init = -kInf;
    Eigen::VectorXd p_init_end(d), p_sharp_init_end(d);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(d);
    const bool valid_init = build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                                       p_init_end, h0, eps, n_leapfrog, log_sum_weight_init, sum_metro_prob);
    if (!valid_init) return false;

    // final subtree
    PhasePoint z_propose_final = z;
    double log_sum_weight_final = -kInf;
    Eigen::VectorXd p_final_beg(d), p_sharp_final_beg(d);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(d);
    const bool valid_final = build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                                        p_final_beg, p_end, h0, eps, n_leapfrog, log_sum_weight_final,
                                        sum_metro_prob);
    if (!valid_final) return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (rng_.uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_extended = rho_init + p_final_beg;
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  const LogDensityFn& f_;
  std::size_t dim_;
  const SamplerConfig& config_;
  Rng& rng_;
  Eigen::VectorXd inv_metric_;
  double eps_ = 1.0;
  bool divergent_ = false;
  double max_energy_error_ = -kInf;
};

bool finite_point(const PhasePoint& z) { return std::isfinite(z.log_p) && z.grad.allFinite(); }

}  // namespace

void SamplerConfig::validate() const {
  if (retain_iters < 1) throw std::invalid_argument("retain_iters must be at least 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("max_tree_depth must be at least 1");
  if (!(divergence_threshold > 0.0)) throw std::invalid_argument("divergence_threshold must be positive");
  if (!(init_step_size > 0.0)) throw std::invalid_argument("init_step_size must be positive");
}

ChainDraws nuts_sample(const LogDensityFn& log_density, std::size_t dim, const SamplerConfig& config,
                       const std::optional<UnconstrainedState>& init, std::uint64_t chain_index) {
  config.validate();
  if (dim < 1) throw std::invalid_argument("sampler dimension must be positive");
  if (init && static_cast<std::size_t>(init->size()) != dim) throw std::invalid_argument("init dimension mismatch");

  const auto start = Clock::now();
  Rng rng(config.seed, {chain_index});
  const auto d = static_cast<Eigen::Index>(dim);

  PhasePoint z{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), -kInf};
  Nuts nuts(log_density, dim, config, rng);

  auto jitter = [&](const Eigen::VectorXd& base) {
    for (Eigen::Index i = 0; i < d; ++i) z.q[i] = base[i] + rng.uniform(-config.init_radius, config.init_radius);
  };
  bool ok = false;
  if (init) {
    z.q = *init;
    nuts.evaluate(z);
    ok = finite_point(z);
  }
  const Eigen::VectorXd origin = init ? *init : Eigen::VectorXd::Zero(d);
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    jitter(origin);
    nuts.evaluate(z);
    ok = finite_point(z);
  }
  if (!ok) throw std::runtime_error("initialization failed: log density non-finite after 100 attempts");

  ChainDraws out;
  out.init = z.q;

  nuts.set_step_size(config.init_step_size);
  nuts.init_step_size(z);
  DualAveraging da(config.target_accept, config.da_gamma, config.da_t0, config.da_kappa);
  da.set_mu(std::log(10.0 * nuts.step_size()));
  da.restart();
  WindowedVariance windows(dim, config.warmup_iters, config.init_buffer, config.term_buffer, config.base_window);

  for (std::size_t it = 0; it < config.warmup_iters; ++it) {
    const auto info = nuts.transition(z);
    if (info.divergent) ++out.warmup_divergences;
    nuts.set_step_size(da.learn(info.accept_stat));
    if (windows.learn(z.q, nuts.inv_metric())) {
      nuts.init_step_size(z);
      da.set_mu(std::log(10.0 * nuts.step_size()));
      da.restart();
    }
  }
  if (config.warmup_iters > 0) nuts.set_step_size(da.final_step());
  out.warmup_time = seconds_since(start);
  const auto sampling_start = Clock::now();

  const std::size_t n = config.retain_iters;
  out.draws.resize(static_cast<Eigen::Index>(n), d);
  out.log_density.resize(static_cast<Eigen::Index>(n));
  out.energy_error.resize(static_cast<Eigen::Index>(n));
  out.accept_stat.resize(static_cast<Eigen::Index>(n));
  out.tree_depth.resize(n);
  out.n_leapfrog.resize(n);
  out.divergent.resize(n);
  for (std::size_t it = 0; it < n; ++it) {
    const auto info = nuts.transition(z);
    const auto row = static_cast<Eigen::Index>(it);
    out.draws.row(row) = z.q.transpose();
    out.log_density[row] = z.log_p;
    out.energy_error[row] = info.max_energy_error;
    out.accept_stat[row] = info.accept_stat;
    out.tree_depth[it] = info.depth;
    out.n_leapfrog[it] = info.n_leapfrog;
    out.divergent[it] = info.divergent ? 1 : 0;
    if (info.divergent) ++out.divergences;
  }
  out.step_size = nuts.step_size();
  out.inv_metric = nuts.inv_metric();
  out.sampling_time = seconds_since(sampling_start);
  out.wall_time = seconds_since(start);
  return out;
}

ChainDraws nuts_sample(const TargetSpec& target, const SamplerConfig& config,
                       const std::optional<UnconstrainedState>& init, std::uint64_t chain_index) {
  const LogDensityFn f = [&target](std::span<const double> x, std::span<double> g) {
    return target.log_density(x, g);
  };
  ChainDraws out = nuts_sample(f, target.dim(), config, init, chain_index);
  const auto rows = out.draws.rows();
  const auto n2 = static_cast<Eigen::Index>(target.n2());
  out.z2_draws.resize(rows, n2);
  out.log_summary.resize(rows);
  Eigen::VectorXd state(out.draws.cols());
  Eigen::VectorXd z2(n2);
  for (Eigen::Index r = 0; r < rows; ++r) {
    state = out.draws.row(r).transpose();
    target.recover_z2({state.data(), static_cast<std::size_t>(state.size())},
                      {z2.data(), static_cast<std::size_t>(n2)});
    out.z2_draws.row(r) = z2.transpose();
    out.log_summary[r] = target.log_summary({z2.data(), static_cast<std::size_t>(n2)});
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<ChainOutcome> run_chains(const TargetSpec& target, const SamplerConfig& config,
                                     const std::vector<UnconstrainedState>& inits) {
  std::vector<std::uint64_t> ids(inits.size());
  for (std::size_t c = 0; c < ids.size(); ++c) ids[c] = c;
  return run_chains(target, config, inits, ids);
}

std::vector<ChainOutcome> run_chains(const TargetSpec& target, const SamplerConfig& config,
                                     const std::vector<UnconstrainedState>& inits,
                                     std::span<const std::uint64_t> chain_ids) {
  if (chain_ids.size() != inits.size()) throw std::invalid_argument("one chain id per init required");
  std::vector<ChainOutcome> results(inits.size());
  parallel_for(inits.size(), config.workers, [&](std::size_t c) {
    try {
      results[c].draws = nuts_sample(target, config, inits[c], chain_ids[c]);
    } catch (const std::exception& e) {
      results[c].error = e.what();
    }
  });
  return results;
}

}  // namespace epmix
