"""Engine settings for betatherm.

- Every tolerance and resource knob lives here, nothing is hard-coded in the math.
- Profile changes tolerances, not algorithms.

Env vars are optional overrides. Job files override env, CLI flags override job files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

from betatherm.errors import SchemaError


@dataclass(frozen=True)
class EngineConfig:
    # Profile
    profile: str  # "reference" | "quick"

    # Digits
    working_dps: int
    digit_guard: float

    # Power iteration
    tol: float
    max_iter: int

    # Resource guards
    language_cap: int

    # Zero temperature
    tol_zero: float
    fit_tol: float
    oracle_tol: float
    transpose_tol: float
    eigen_tol: float
    gamma_tol: float
    gamma_tie_tol: float
    boundary_tol: float
    support_floor: float
    bridge_factor: int

    # Orbit oracle
    tie_tol: float
    p_max: int

    # Execution
    workers: int
    seed: int


def _env_int(name: str, default: str) -> int:
    return int(os.getenv(name, default).strip())


def _env_float(name: str, default: str) -> float:
    return float(os.getenv(name, default).strip())


def _profile_defaults(profile: str) -> dict:
    p = (profile or "reference").strip().lower()
    if p not in {"reference", "quick"}:
        p = "reference"

    if p == "quick":
        return {
            "profile": "quick",
            "tol": _env_float("QUICK_TOL", "1e-10"),
            "max_iter": _env_int("QUICK_MAX_ITER", "10000"),
            "fit_tol": _env_float("QUICK_FIT_TOL", "1e-2"),
            "oracle_tol": _env_float("QUICK_ORACLE_TOL", "1e-4"),
            "eigen_tol": _env_float("QUICK_EIGEN_TOL", "1e-6"),
            "gamma_tol": _env_float("QUICK_GAMMA_TOL", "1e-2"),
        }

    return {
        "profile": "reference",
        "tol": _env_float("BETATHERM_TOL", "1e-12"),
        "max_iter": _env_int("BETATHERM_MAX_ITER", "100000"),
        "fit_tol": _env_float("BETATHERM_FIT_TOL", "1e-3"),
        "oracle_tol": _env_float("BETATHERM_ORACLE_TOL", "1e-6"),
        "eigen_tol": _env_float("BETATHERM_EIGEN_TOL", "1e-8"),
        "gamma_tol": _env_float("BETATHERM_GAMMA_TOL", "1e-3"),
    }


def apply_profile(config: EngineConfig, profile: str) -> EngineConfig:
    """Return a new config with profile-dependent tolerances applied."""
    return replace(config, **_profile_defaults(profile))


def apply_overrides(config: EngineConfig, overrides: Mapping[str, Any], *, path: str = "tolerances") -> EngineConfig:
    """Fold a job file's override block into the config, field by field."""
    known = {f.name for f in fields(EngineConfig)}
    changes: dict[str, Any] = {}
    for key, value in overrides.items():
        if key not in known or key == "profile":
            raise SchemaError(f"{path}.{key}", "unknown setting")
        current = getattr(config, key)
        try:
            changes[key] = int(value) if isinstance(current, int) else float(value)
        except (TypeError, ValueError):
            raise SchemaError(f"{path}.{key}", f"expected a number, got {value!r}") from None
    return replace(config, **changes)


def load_config() -> EngineConfig:
    """Load configuration from environment with reference defaults."""
    pd = _profile_defaults(os.getenv("BETATHERM_PROFILE", "reference"))

    return EngineConfig(
        profile=pd["profile"],
        working_dps=_env_int("BETATHERM_DPS", "50"),
        digit_guard=_env_float("BETATHERM_DIGIT_GUARD", "1e-12"),
        tol=pd["tol"],
        max_iter=pd["max_iter"],
        language_cap=_env_int("BETATHERM_LANGUAGE_CAP", "2000000"),
        tol_zero=_env_float("BETATHERM_TOL_ZERO", "1e-9"),
        fit_tol=pd["fit_tol"],
        oracle_tol=pd["oracle_tol"],
        transpose_tol=_env_float("BETATHERM_TRANSPOSE_TOL", "1e-8"),
        eigen_tol=pd["eigen_tol"],
        gamma_tol=pd["gamma_tol"],
        gamma_tie_tol=_env_float("BETATHERM_GAMMA_TIE_TOL", "1e-6"),
        boundary_tol=_env_float("BETATHERM_BOUNDARY_TOL", "1e-4"),
        support_floor=_env_float("BETATHERM_SUPPORT_FLOOR", "1e-3"),
        bridge_factor=_env_int("BETATHERM_BRIDGE_FACTOR", "2"),
        tie_tol=_env_float("BETATHERM_TIE_TOL", "1e-12"),
        p_max=_env_int("BETATHERM_P_MAX", "10"),
        workers=_env_int("BETATHERM_WORKERS", "1"),
        seed=_env_int("BETATHERM_SEED", "0"),
    )
