"""Length-direction decoupled gradient methods."""

from normgrad._core import (
    HalfspaceProblem,
    Model,
    ProbeData,
    ProbeNet,
    cross_dependency,
    dominant_direction,
    find_init,
    gd,
    gdnp,
    grad_rho,
    make_probe_data,
    optimal_scale,
    probe_loss,
    rho,
    run_experiment_config,
    solve_ols,
    stein_coeffs,
    synth_model,
    train_mlp,
    train_probe,
)

__all__ = [
    "HalfspaceProblem",
    "Model",
    "ProbeData",
    "ProbeNet",
    "cross_dependency",
    "dominant_direction",
    "find_init",
    "gd",
    "gdnp",
    "grad_rho",
    "make_probe_data",
    "optimal_scale",
    "probe_loss",
    "rho",
    "run_experiment_config",
    "solve_ols",
    "stein_coeffs",
    "synth_model",
    "train_mlp",
    "train_probe",
]
