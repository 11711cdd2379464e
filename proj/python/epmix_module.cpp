#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "epmix/dataset.hpp"
#include "epmix/diagnostics.hpp"
#include "epmix/exp_power.hpp"
#include "epmix/experiment.hpp"
#include "epmix/hyper.hpp"
#include "epmix/mixture.hpp"
#include "epmix/nuts.hpp"
#include "epmix/svg_plot.hpp"
#include "epmix/targets.hpp"

namespace py = pybind11;
using namespace epmix;

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

py::dict draws_to_dict(const ChainDraws& d) {
  py::dict out;
  out["draws"] = d.draws;
  out["z2_draws"] = d.z2_draws;
  out["log_summary"] = d.log_summary;
  out["log_density"] = d.log_density;
  out["accept_stat"] = d.accept_stat;
  out["tree_depth"] = d.tree_depth;
  out["n_leapfrog"] = d.n_leapfrog;
  std::vector<bool> div(d.divergent.begin(), d.divergent.end());
  out["divergent"] = div;
  out["divergences"] = d.divergences;
  out["warmup_divergences"] = d.warmup_divergences;
  out["init"] = d.init;
  out["step_size"] = d.step_size;
  out["inv_metric"] = d.inv_metric;
  out["warmup_time"] = d.warmup_time;
  out["sampling_time"] = d.sampling_time;
  out["wall_time"] = d.wall_time;
  return out;
}

SamplerConfig sampler_config(std::size_t warmup, std::size_t retain, std::uint64_t seed, double target_accept,
                             int max_tree_depth, std::size_t chains, std::size_t workers) {
  SamplerConfig c;
  c.warmup_iters = warmup;
  c.retain_iters = retain;
  c.seed = seed;
  c.target_accept = target_accept;
  c.max_tree_depth = max_tree_depth;
  c.chains = chains;
  c.workers = workers;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exponential power priors, their normal scale mixture representation and NUTS sampling";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", &Rng::normal)
      .def("gamma", &Rng::gamma, py::arg("shape"));

  py::class_<ExpPowerParams>(m, "ExpPowerParams")
      .def(py::init<double, double>(), py::arg("q"), py::arg("lam"))
      .def_property_readonly("q", &ExpPowerParams::q)
      .def_property_readonly("lam", &ExpPowerParams::lambda)
      .def("__repr__", [](const ExpPowerParams& p) {
        return "ExpPowerParams(q=" + format_number(p.q()) + ", lam=" + format_number(p.lambda()) + ")";
      });

  m.def("ep_log_norm_const", &ep_log_norm_const, py::arg("params"));
  m.def(
      "ep_logpdf", [](const ExpPowerParams& p, const Eigen::VectorXd& z) { return ep_logpdf(p, as_span(z)); },
      py::arg("params"), py::arg("z"), "sum of log densities over z");
  m.def(
      "ep_sample",
      [](const ExpPowerParams& p, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return ep_sample(p, n, rng);
      },
      py::arg("params"), py::arg("n"), py::arg("seed"));
  m.def("ep_variance", &ep_variance, py::arg("params"));
  m.def("lambda_for_variance", &lambda_for_variance, py::arg("q"), py::arg("tau2"));

  m.def("zolotarev_logpdf", &zolotarev_logpdf, py::arg("delta"), py::arg("q"));
  m.def("k_factor", &k_factor, py::arg("delta"), py::arg("q"));
  m.def(
      "zolotarev_sample",
      [](double q, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return zolotarev_sample(q, n, rng);
      },
      py::arg("q"), py::arg("n"), py::arg("seed"));
  m.def(
      "zolotarev_acceptance_rate", [](double q) { return ZolotarevSampler(q).acceptance_rate(); }, py::arg("q"));
  m.def(
      "tilted_stable_sample",
      [](double q, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return tilted_stable_sample(q, n, rng);
      },
      py::arg("q"), py::arg("n"), py::arg("seed"));
  m.def(
      "compose_ep_sample",
      [](const ExpPowerParams& p, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return compose_ep_sample(p, n, rng);
      },
      py::arg("params"), py::arg("n"), py::arg("seed"));
  m.def("v_from_latents", &v_from_latents, py::arg("xi"), py::arg("delta"), py::arg("q"));

  py::enum_<Parametrization>(m, "Parametrization")
      .value("naive", Parametrization::naive)
      .value("centered", Parametrization::centered)
      .value("noncentered", Parametrization::noncentered);

  py::class_<TargetSpec>(m, "TargetSpec")
      .def(py::init([](const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double sigma2, const ExpPowerParams& ep,
                       Parametrization p) { return TargetSpec::regression(RegressionProblem(y, X, sigma2), ep, p); }),
           py::arg("y"), py::arg("X"), py::arg("sigma2"), py::arg("ep"), py::arg("parametrization"))
      .def_property_readonly("dim", &TargetSpec::dim)
      .def_property_readonly("n2", &TargetSpec::n2)
      .def("log_density_and_grad",
           [](const TargetSpec& t, const Eigen::VectorXd& x) { return log_target_and_grad(t, x); }, py::arg("state"))
      .def("recover_z2", [](const TargetSpec& t, const Eigen::VectorXd& x) { return recover_z2(t, x); },
           py::arg("state"))
      .def(
          "state_from_constrained",
          [](const TargetSpec& t, const Eigen::VectorXd& z2, const Eigen::VectorXd& xi, const Eigen::VectorXd& delta) {
            return t.state_from_constrained(as_span(z2), as_span(xi), as_span(delta));
          },
          py::arg("z2"), py::arg("xi"), py::arg("delta"))
      .def("log_summary", [](const TargetSpec& t, const Eigen::VectorXd& z2) { return t.log_summary(as_span(z2)); },
           py::arg("z2"));

  m.def(
      "nuts_sample",
      [](const TargetSpec& target, std::size_t warmup, std::size_t retain, std::uint64_t seed,
         std::optional<Eigen::VectorXd> init, std::uint64_t chain, double target_accept, int max_tree_depth) {
        const SamplerConfig c = sampler_config(warmup, retain, seed, target_accept, max_tree_depth, 1, 1);
        py::gil_scoped_release release;
        ChainDraws d = nuts_sample(target, c, init, chain);
        py::gil_scoped_acquire acquire;
        return draws_to_dict(d);
      },
      py::arg("target"), py::arg("warmup") = 1000, py::arg("retain") = 1000, py::arg("seed") = 0,
      py::arg("init") = py::none(), py::arg("chain") = 0, py::arg("target_accept") = 0.8,
      py::arg("max_tree_depth") = 10);

  m.def(
      "ess", [](const Eigen::VectorXd& x) { return ess(as_span(x)).ess; }, py::arg("series"));
  m.def(
      "split_rhat",
      [](const std::vector<Eigen::VectorXd>& chains) {
        std::vector<std::span<const double>> spans;
        for (const auto& c : chains) spans.push_back(as_span(c));
        return split_rhat(spans).rhat;
      },
      py::arg("chains"));
  m.def(
      "kde",
      [](const Eigen::VectorXd& x, std::size_t grid_points) {
        const auto r = kde(as_span(x), grid_points);
        return py::make_tuple(r.grid, r.density, r.bandwidth);
      },
      py::arg("values"), py::arg("grid_points") = 512, "returns (grid, density, bandwidth)");

  py::class_<ThetaPoint>(m, "ThetaPoint")
      .def_readonly("sigma2", &ThetaPoint::sigma2)
      .def_readonly("lam", &ThetaPoint::lambda)
      .def_readonly("q", &ThetaPoint::q);
  m.def("evidence_objective", &evidence_objective, py::arg("y"), py::arg("X"), py::arg("sigma2"), py::arg("tau2"),
        py::arg("half_quadratic") = true);
  m.def(
      "fit_sigma2_tau2",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool half_quadratic) {
        const auto f = fit_sigma2_tau2(y, X, half_quadratic);
        py::dict out;
        out["sigma2"] = f.sigma2;
        out["tau2"] = f.tau2;
        out["objective"] = f.objective;
        out["sigma2_at_boundary"] = f.sigma2_at_boundary;
        out["tau2_at_boundary"] = f.tau2_at_boundary;
        out["converged_starts"] = f.converged_starts;
        return out;
      },
      py::arg("y"), py::arg("X"), py::arg("half_quadratic") = true);
  m.def("build_theta_grid", &build_theta_grid, py::arg("sigma2_hat"), py::arg("tau2_hat"));

  m.def(
      "load_dataset",
      [](const std::string& path, const std::string& response, bool standardize) {
        const auto d = load_dataset(path, response, standardize);
        return py::make_tuple(d.y, d.X, d.covariates);
      },
      py::arg("path"), py::arg("response") = "y", py::arg("standardize") = true, "returns (y, X, covariate names)");
  m.def(
      "make_synthetic_regression",
      [](std::size_t m_rows, std::size_t n2, std::uint64_t seed, double sigma2, double rho) {
        const auto d = make_synthetic_regression(m_rows, n2, seed, sigma2, rho);
        return py::make_tuple(d.y, d.X);
      },
      py::arg("m"), py::arg("n2"), py::arg("seed"), py::arg("sigma2") = 1.0, py::arg("rho") = 0.5);

  m.def(
      "run_experiment",
      [](const std::string& data, const std::string& out, std::vector<std::string> params, std::size_t chains,
         std::size_t warmup, std::size_t retain, std::uint64_t seed, std::vector<double> q_list,
         const std::string& response, bool standardize, double plot_q, std::size_t workers, bool half_quadratic) {
        ExperimentConfig cfg;
        cfg.dataset_path = data;
        cfg.output_dir = out;
        cfg.parametrizations.clear();
        for (const auto& p : params) cfg.parametrizations.push_back(parse_parametrization(p));
        cfg.sampler.chains = chains;
        cfg.sampler.warmup_iters = warmup;
        cfg.sampler.retain_iters = retain;
        cfg.sampler.seed = seed;
        cfg.sampler.workers = workers;
        cfg.q_list = std::move(q_list);
        cfg.response = response;
        cfg.standardize = standardize;
        cfg.plot_q = plot_q;
        cfg.evidence_half_quadratic = half_quadratic;
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(cfg);
          write_report(report, cfg);
        }
        py::dict res;
        res["sigma2_hat"] = report.fit.sigma2;
        res["tau2_hat"] = report.fit.tau2;
        res["total_chains"] = report.total_chains;
        res["failed_chains"] = report.failed_chains;
        res["warnings"] = report.warnings;
        return res;
      },
      py::arg("data"), py::arg("out"),
      py::arg("parametrizations") = std::vector<std::string>{"naive", "centered", "noncentered"},
      py::arg("chains") = 10, py::arg("warmup") = 1000, py::arg("retain") = 1000, py::arg("seed") = 20240229,
      py::arg("q_list") = std::vector<double>{}, py::arg("response") = "y", py::arg("standardize") = true,
      py::arg("plot_q") = 0.2, py::arg("workers") = 0, py::arg("half_quadratic") = true,
      "runs the experiment and writes its files into `out`");
  m.def("plot_summary", &plot_summary, py::arg("summary_path"), py::arg("kde_path"), py::arg("out_dir"),
        py::arg("plot_q") = 0.2);
}
