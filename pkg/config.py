# config.py
# Load numeric tolerances, caps and logging settings from the environment (.env) with safe defaults.

import os
from dotenv import load_dotenv

# Load variables from a .env file (if present)
load_dotenv()


def _float_env(name: str, default: float) -> float:
    val = os.getenv(name)
    if val is None or val == "":
        return default
    try:
        # allow underscores like 1_000.0
        return float(val.replace("_", ""))
    except ValueError:
        return default


def _int_env(name: str, default: int) -> int:
    val = os.getenv(name)
    if val is None or val == "":
        return default
    try:
        return int(val.replace("_", ""))
    except ValueError:
        return default


# === HERMITIAN LINEAR ALGEBRA ===
# Max-norm tolerance on M - M^dagger
HERM_TOL: float = _float_env("SATREP_HERM_TOL", 1e-12)
# Eigenvalues down to -PSD_TOL still count as nonnegative
PSD_TOL: float = _float_env("SATREP_PSD_TOL", 1e-10)
# Reconstruction / orthonormality residual of the eigensolver
EIG_TOL: float = _float_env("SATREP_EIG_TOL", 1e-10)
# Eigenvalues closer than this belong to the same spectral atom
CLUSTER_TOL: float = _float_env("SATREP_CLUSTER_TOL", 1e-8)
# Sweep cap for cyclic Jacobi
JACOBI_MAX_SWEEPS: int = _int_env("SATREP_JACOBI_MAX_SWEEPS", 100)

# === OBSERVABLES & INSTRUMENTS ===
SUM_TOL: float = _float_env("SATREP_SUM_TOL", 1e-9)
ZERO_TOL: float = _float_env("SATREP_ZERO_TOL", 1e-12)
PROP_TOL: float = _float_env("SATREP_PROP_TOL", 1e-9)
PROB_TOL: float = _float_env("SATREP_PROB_TOL", 1e-10)
# Structural identities (projections, marginals, repeatability)
STRUCT_TOL: float = _float_env("SATREP_STRUCT_TOL", 1e-9)
# Column sums of Markov kernels
STOCH_TOL: float = _float_env("SATREP_STOCH_TOL", 1e-10)
# Max |Omega|^n enumerated by repeated_observable
ENUMERATION_CAP: int = _int_env("SATREP_ENUMERATION_CAP", 4096)

# === PREORDER ===
FEAS_TOL: float = _float_env("SATREP_FEAS_TOL", 1e-7)
WITNESS_TOL: float = _float_env("SATREP_WITNESS_TOL", 1e-6)
DEFAULT_N_MAX: int = _int_env("SATREP_DEFAULT_N_MAX", 8)

# === SIMULATION ===
DEFAULT_BINS: int = _int_env("SATREP_DEFAULT_BINS", 50)

# === LOGGING ===
LOG_LEVEL: str = os.getenv("SATREP_LOG_LEVEL", "INFO").strip().upper() or "INFO"
LOG_DIR: str = os.getenv("SATREP_LOG_DIR", "logs").strip() or "logs"
LOG_RETENTION_DAYS: int = _int_env("SATREP_LOG_RETENTION_DAYS", 14)
