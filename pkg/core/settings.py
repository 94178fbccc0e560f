# core/settings.py
# Numeric tolerances and run caps as one immutable record.

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Mapping

from config import (
    HERM_TOL,
    PSD_TOL,
    EIG_TOL,
    CLUSTER_TOL,
    JACOBI_MAX_SWEEPS,
    SUM_TOL,
    ZERO_TOL,
    PROP_TOL,
    PROB_TOL,
    STRUCT_TOL,
    STOCH_TOL,
    ENUMERATION_CAP,
    FEAS_TOL,
    WITNESS_TOL,
)
from core.errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    """
    Single source of truth for every numeric comparison:
    - herm/psd/eig/cluster: Hermitian linear algebra
    - sum/zero/prop/prob/struct/stoch: observables, instruments, kernels
    - feas/witness: preorder decisions
    - jacobi_max_sweeps, enumeration_cap: iteration & size caps
    """

    herm_tol: float = HERM_TOL
    psd_tol: float = PSD_TOL
    eig_tol: float = EIG_TOL
    cluster_tol: float = CLUSTER_TOL
    sum_tol: float = SUM_TOL
    zero_tol: float = ZERO_TOL
    prop_tol: float = PROP_TOL
    prob_tol: float = PROB_TOL
    struct_tol: float = STRUCT_TOL
    stoch_tol: float = STOCH_TOL
    feas_tol: float = FEAS_TOL
    witness_tol: float = WITNESS_TOL

    jacobi_max_sweeps: int = JACOBI_MAX_SWEEPS
    enumeration_cap: int = ENUMERATION_CAP

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Tolerances":
        """Return a copy with some fields replaced; unknown keys and non-positive values are rejected."""
        known = {f.name: f.type for f in fields(self)}
        clean: Dict[str, Any] = {}
        for key, raw in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown tolerance '{key}'")
            try:
                value = int(raw) if key in ("jacobi_max_sweeps", "enumeration_cap") else float(raw)
            except (TypeError, ValueError, OverflowError):
                raise ConfigError(f"tolerance '{key}' is not a number: {raw!r}") from None
            if not 0 < value < math.inf:
                raise ConfigError(f"tolerance '{key}' must be positive and finite, got {value}")
            clean[key] = value
        return replace(self, **clean)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


tolerances = Tolerances()
