// epmix: run the bridge-prior sampling experiment, fit evidence
// hyperparameters, draw plots and write synthetic datasets.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epmix/dataset.hpp"
#include "epmix/experiment.hpp"
#include "epmix/hyper.hpp"
#include "epmix/svg_plot.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kAllFailed = 3 };

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_q_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw epmix::ConfigError("bad q value '" + item + "'");
    }
  }
  return out;
}

bool parse_evidence_form(const std::string& s) {
  if (s == "half") return true;
  if (s == "printed") return false;
  throw epmix::ConfigError("evidence form must be 'half' or 'printed', got '" + s + "'");
}

struct RunArgs {
  std::string data;
  std::string response = "y";
  bool standardize = true;
  std::string params = "naive,centered,noncentered";
  std::size_t chains = 10;
  std::size_t warmup = 1000;
  std::size_t retain = 1000;
  std::uint64_t seed = 20240229;
  std::string out = "epmix_out";
  std::string q_list;
  double plot_q = 0.2;
  std::size_t workers = 0;
  std::string evidence_form = "half";
  double sigma2 = 0.0;
  double tau2 = 0.0;
  double target_accept = 0.8;
  int max_depth = 10;
  bool quiet = false;
};

int run(const RunArgs& a) {
  epmix::ExperimentConfig cfg;
  cfg.dataset_path = a.data;
  cfg.response = a.response;
  cfg.standardize = a.standardize;
  cfg.parametrizations.clear();
  for (const auto& name : split_list(a.params)) {
    try {
      cfg.parametrizations.push_back(epmix::parse_parametrization(name));
    } catch (const std::exception&) {
      throw epmix::ConfigError("unknown parametrization '" + name + "'");
    }
  }
  cfg.sampler.chains = a.chains;
  cfg.sampler.warmup_iters = a.warmup;
  cfg.sampler.retain_iters = a.retain;
  cfg.sampler.seed = a.seed;
  cfg.sampler.workers = a.workers;
  cfg.sampler.target_accept = a.target_accept;
  cfg.sampler.max_tree_depth = a.max_depth;
  cfg.output_dir = a.out;
  cfg.q_list = parse_q_list(a.q_list);
  cfg.plot_q = a.plot_q;
  cfg.evidence_half_quadratic = parse_evidence_form(a.evidence_form);
  if (a.sigma2 > 0.0) cfg.sigma2_override = a.sigma2;
  if (a.tau2 > 0.0) cfg.tau2_override = a.tau2;
  if (!a.quiet) {
    cfg.on_progress = [](std::size_t done, std::size_t total) {
      if (done % 10 == 0 || done == total) std::fprintf(stderr, "chains finished: %zu/%zu\n", done, total);
    };
  }

  const auto report = epmix::run_experiment(cfg);
  epmix::write_report(report, cfg);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("sigma2_hat=%s tau2_hat=%s chains=%zu failed=%zu out=%s\n",
              epmix::format_number(report.fit.sigma2).c_str(), epmix::format_number(report.fit.tau2).c_str(),
              report.total_chains, report.failed_chains, cfg.output_dir.c_str());
  if (report.total_chains > 0 && report.failed_chains == report.total_chains) {
    std::fprintf(stderr, "error: every chain failed\n");
    return kAllFailed;
  }
  return kOk;
}

// Fills options not given on the command line from "key = value" lines.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw epmix::ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      s = s.substr(b, e - b + 1);
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw epmix::ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw epmix::ConfigError(path + ": config files cannot nest");
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw epmix::ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw epmix::ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bridge-prior posterior sampling experiments"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "run every (q, parametrization, chain) cell and write outputs");
  run_cmd->add_option("--data", ra.data, "CSV with a header row");
  run_cmd->add_option("--response", ra.response, "response column name")->capture_default_str();
  run_cmd->add_flag("--standardize,!--no-standardize", ra.standardize, "center/scale X and center y")
      ->capture_default_str();
  run_cmd->add_option("--params", ra.params, "comma list of naive, centered, noncentered")->capture_default_str();
  run_cmd->add_option("--chains", ra.chains)->capture_default_str();
  run_cmd->add_option("--warmup", ra.warmup)->capture_default_str();
  run_cmd->add_option("--retain", ra.retain)->capture_default_str();
  run_cmd->add_option("--seed", ra.seed)->capture_default_str();
  run_cmd->add_option("--out", ra.out, "output directory")->capture_default_str();
  run_cmd->add_option("--q-list", ra.q_list, "comma list of grid q values (default: all nine)");
  run_cmd->add_option("--plot-q", ra.plot_q, "q shown in the density figure")->capture_default_str();
  run_cmd->add_option("--workers", ra.workers, "threads, 0 = all cores")->capture_default_str();
  run_cmd->add_option("--evidence-form", ra.evidence_form, "half or printed")->capture_default_str();
  run_cmd->add_option("--sigma2", ra.sigma2, "fix sigma2 instead of fitting it");
  run_cmd->add_option("--tau2", ra.tau2, "fix tau2 instead of fitting it");
  run_cmd->add_option("--target-accept", ra.target_accept)->capture_default_str();
  run_cmd->add_option("--max-depth", ra.max_depth)->capture_default_str();
  run_cmd->add_flag("--quiet", ra.quiet, "no progress output");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "flat key = value file; command-line flags override it");

  std::string plot_summary_path, plot_kde_path, plot_out = ".";
  double plot_q = 0.2;
  auto* plot_cmd = app.add_subcommand("plot", "redraw figures from summary.csv and kde.csv");
  plot_cmd->add_option("--summary", plot_summary_path)->required();
  plot_cmd->add_option("--kde", plot_kde_path)->required();
  plot_cmd->add_option("--out", plot_out)->capture_default_str();
  plot_cmd->add_option("--plot-q", plot_q)->capture_default_str();

  std::string fit_data, fit_response = "y", fit_form = "half";
  bool fit_standardize = true;
  auto* fit_cmd = app.add_subcommand("fit", "print evidence estimates of sigma2, tau2 and the q grid");
  fit_cmd->add_option("--data", fit_data)->required();
  fit_cmd->add_option("--response", fit_response)->capture_default_str();
  fit_cmd->add_flag("--standardize,!--no-standardize", fit_standardize)->capture_default_str();
  fit_cmd->add_option("--evidence-form", fit_form)->capture_default_str();

  std::size_t syn_m = 60, syn_n2 = 8;
  std::uint64_t syn_seed = 1;
  double syn_sigma2 = 1.0, syn_rho = 0.5;
  std::string syn_out;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic regression dataset");
  synth_cmd->add_option("--m", syn_m, "rows")->capture_default_str();
  synth_cmd->add_option("--n2", syn_n2, "covariates")->capture_default_str();
  synth_cmd->add_option("--seed", syn_seed)->capture_default_str();
  synth_cmd->add_option("--sigma2", syn_sigma2, "noise variance")->capture_default_str();
  synth_cmd->add_option("--rho", syn_rho, "covariate AR correlation")->capture_default_str();
  synth_cmd->add_option("--out", syn_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*run_cmd) {
      if (!config_path.empty()) apply_config_file(*run_cmd, config_path);
      return run(ra);
    }
    if (*plot_cmd) {
      for (const auto& p : epmix::plot_summary(plot_summary_path, plot_kde_path, plot_out, plot_q)) {
        std::printf("%s\n", p.c_str());
      }
      return kOk;
    }
    if (*fit_cmd) {
      const auto data = epmix::load_dataset(fit_data, fit_response, fit_standardize);
      const auto fit = epmix::fit_sigma2_tau2(data.y, data.X, parse_evidence_form(fit_form));
      std::printf("m=%lld n2=%lld\n", static_cast<long long>(data.y.size()), static_cast<long long>(data.X.cols()));
      std::printf("sigma2_hat=%s%s\n", epmix::format_number(fit.sigma2).c_str(),
                  fit.sigma2_at_boundary ? " (at search boundary)" : "");
      std::printf("tau2_hat=%s%s\n", epmix::format_number(fit.tau2).c_str(),
                  fit.tau2_at_boundary ? " (at search boundary)" : "");
      for (const auto& th : epmix::build_theta_grid(fit.sigma2, fit.tau2)) {
        std::printf("q=%s lambda=%s\n", epmix::format_number(th.q).c_str(), epmix::format_number(th.lambda).c_str());
      }
      return kOk;
    }
    if (*synth_cmd) {
      if (syn_m < 2 || syn_n2 < 1) throw epmix::ConfigError("synth needs m >= 2 and n2 >= 1");
      if (!(syn_rho > -1.0 && syn_rho < 1.0)) throw epmix::ConfigError("rho must lie in (-1, 1)");
      if (!(syn_sigma2 >= 0.0)) throw epmix::ConfigError("sigma2 must be nonnegative");
      epmix::write_dataset_csv(epmix::make_synthetic_regression(syn_m, syn_n2, syn_seed, syn_sigma2, syn_rho), syn_out);
      std::printf("%s\n", syn_out.c_str());
      return kOk;
    }
  } catch (const epmix::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const epmix::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kOk;
}
