"""Exponential power (bridge) priors, their normal scale mixture
representation and a NUTS sampler for the three parametrizations."""

from ._core import (
    ConfigError,
    DataError,
    ExpPowerParams,
    Parametrization,
    Rng,
    TargetSpec,
    ThetaPoint,
    build_theta_grid,
    compose_ep_sample,
    ep_log_norm_const,
    ep_logpdf,
    ep_sample,
    ep_variance,
    ess,
    evidence_objective,
    fit_sigma2_tau2,
    k_factor,
    kde,
    lambda_for_variance,
    load_dataset,
    make_synthetic_regression,
    nuts_sample,
    plot_summary,
    run_experiment,
    split_rhat,
    tilted_stable_sample,
    v_from_latents,
    zolotarev_acceptance_rate,
    zolotarev_logpdf,
    zolotarev_sample,
)

__version__ = "0.1.0"
