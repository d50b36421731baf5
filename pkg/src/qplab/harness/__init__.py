from .config import Constants, ExperimentConfig, RunManifest, canonical_text, config_hash
from .runs import (
    run_continuity_probe,
    run_convergence_fit,
    run_identity_checks,
    run_ldt,
    run_localize,
    run_loja,
    run_lyapunov_sweep,
    run_multiscale,
    write_csv,
)

__all__ = [
    "Constants",
    "ExperimentConfig",
    "RunManifest",
    "canonical_text",
    "config_hash",
    "run_lyapunov_sweep",
    "run_ldt",
    "run_multiscale",
    "run_continuity_probe",
    "run_convergence_fit",
    "run_loja",
    "run_localize",
    "run_identity_checks",
    "write_csv",
]
