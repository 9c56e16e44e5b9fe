from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from betatherm.beta import DEFAULT_DPS, BetaSpec
from betatherm.errors import SchemaError
from betatherm.symbolic import BilateralPair, Word, format_word, parse_sequence, parse_word
from betatherm.transfer import Potential, make_potential

DEFAULT_T_GRID = "2:256:geometric"

_TOP_LEVEL = {
    "beta",
    "potential",
    "depth",
    "t_grid",
    "tol",
    "tolerances",
    "seed",
    "p_max",
    "out",
    "cylinders",
    "pairs",
    "profile",
}


@dataclass(frozen=True)
class JobConfig:
    """One validated job file; `spec` and `potential` are resolved on parse."""

    beta_value: str | None
    beta_digits: str | None
    table: Mapping[Word, float] | None
    theta: float
    depth: int | None
    t_grid: str
    tolerances: Mapping[str, float]
    seed: int
    p_max: int | None
    out: str | None
    cylinders: tuple[Word, ...]
    pairs: str | None
    profile: str | None
    spec: BetaSpec = field(compare=False, repr=False)
    potential: Potential | None = field(compare=False, repr=False, default=None)


def _require(raw: Mapping[str, Any], key: str, kind: type | tuple[type, ...], path: str) -> Any:
    if key not in raw:
        raise SchemaError(f"{path}.{key}" if path else key, "missing")
    value = raw[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"{path}.{key}" if path else key, f"unexpected type {type(value).__name__}")
    return value


def _optional_int(raw: Mapping[str, Any], key: str, minimum: int) -> int | None:
    if raw.get(key) is None:
        return None
    value = _require(raw, key, int, "")
    if value < minimum:
        raise SchemaError(key, f"must be >= {minimum}")
    return value


def _parse_beta(raw: Mapping[str, Any]) -> tuple[str | None, str | None]:
    beta = _require(raw, "beta", dict, "")
    keys = set(beta) & {"value", "digits"}
    if len(keys) != 1 or set(beta) - {"value", "digits"}:
        raise SchemaError("beta", "give exactly one of beta.value or beta.digits")
    if "digits" in beta:
        return None, str(_require(beta, "digits", str, "beta"))
    value = _require(beta, "value", (int, float, str), "beta")
    return str(value), None


def _parse_table(raw: Mapping[str, Any]) -> tuple[dict[Word, float], float, int]:
    pot = _require(raw, "potential", dict, "")
    unknown = set(pot) - {"depth", "table", "theta"}
    if unknown:
        raise SchemaError(f"potential.{sorted(unknown)[0]}", "unknown field")
    table_raw = _require(pot, "table", dict, "potential")
    table: dict[Word, float] = {}
    for key, value in table_raw.items():
        try:
            word = parse_word(str(key))
        except ValueError as e:
            raise SchemaError(f"potential.table.{key}", str(e)) from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"potential.table.{key}", "expected a number")
        table[word] = float(value)
    depth = pot.get("depth")
    if depth is not None:
        if not isinstance(depth, int) or isinstance(depth, bool) or depth < 1:
            raise SchemaError("potential.depth", "expected a positive integer")
        bad = [w for w in table if len(w) != depth]
        if bad:
            raise SchemaError(f"potential.table.{format_word(bad[0])}", f"key length differs from depth {depth}")
    theta = pot.get("theta", 1.0)
    if not isinstance(theta, (int, float)) or isinstance(theta, bool):
        raise SchemaError("potential.theta", "expected a number")
    return table, float(theta), int(depth or 0)


def _parse_tolerances(raw: Mapping[str, Any]) -> dict[str, float]:
    if not isinstance(raw.get("tolerances", {}), dict):
        raise SchemaError("tolerances", "expected an object")
    tols = dict(raw.get("tolerances") or {})
    if "tol" in raw:
        tols.setdefault("tol", raw["tol"])
    out: dict[str, float] = {}
    for key, value in tols.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"tolerances.{key}", f"expected a number, got {value!r}")
        out[str(key)] = value
    return out


def _parse_grid(raw: Mapping[str, Any]) -> str:
    grid = raw.get("t_grid", DEFAULT_T_GRID)
    if isinstance(grid, list):
        if not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in grid):
            raise SchemaError("t_grid", "expected a list of numbers")
        return ",".join(repr(float(t)) for t in grid)
    if not isinstance(grid, str):
        raise SchemaError("t_grid", "expected a string or a list")
    return grid


def resolve_spec(beta_value: str | None, beta_digits: str | None, *, dps: int = DEFAULT_DPS) -> BetaSpec:
    try:
        if beta_digits is not None:
            return BetaSpec.from_digits(beta_digits, dps=dps)
        return BetaSpec.from_value(beta_value, dps=dps)
    except ValueError as e:
        raise SchemaError("beta", str(e)) from None


def job_from_mapping(raw: Mapping[str, Any], *, dps: int = DEFAULT_DPS) -> JobConfig:
    if not isinstance(raw, Mapping):
        raise SchemaError("$", "job must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown field")

    beta_value, beta_digits = _parse_beta(raw)
    spec = resolve_spec(beta_value, beta_digits, dps=dps)

    table: dict[Word, float] | None = None
    theta, potential = 1.0, None
    if "potential" in raw:
        table, theta, _ = _parse_table(raw)
        potential = make_potential(table, spec, theta=theta)

    cylinders_raw = raw.get("cylinders", [])
    if not isinstance(cylinders_raw, list):
        raise SchemaError("cylinders", "expected a list of words")
    try:
        cylinders = tuple(parse_word(str(c)) for c in cylinders_raw)
    except ValueError as e:
        raise SchemaError("cylinders", str(e)) from None

    pairs = raw.get("pairs")
    if pairs is not None and not isinstance(pairs, str):
        raise SchemaError("pairs", "expected 'random:N' or 'file:<path>'")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise SchemaError("out", "expected a path")
    profile = raw.get("profile")
    if profile is not None and profile not in ("reference", "quick"):
        raise SchemaError("profile", "expected 'reference' or 'quick'")

    return JobConfig(
        beta_value=beta_value,
        beta_digits=beta_digits,
        table=table,
        theta=theta,
        depth=_optional_int(raw, "depth", 1),
        t_grid=_parse_grid(raw),
        tolerances=_parse_tolerances(raw),
        seed=_optional_int(raw, "seed", 0) or 0,
        p_max=_optional_int(raw, "p_max", 1),
        out=out,
        cylinders=cylinders,
        pairs=pairs,
        profile=profile,
        spec=spec,
        potential=potential,
    )


def _loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON: {e.msg} (line {e.lineno})") from None


def parse_config(text: str, *, dps: int = DEFAULT_DPS) -> JobConfig:
    """Validate a JSON job; table keys are checked against the beta-shift."""
    return job_from_mapping(_loads(text), dps=dps)


def load_job_mapping(path: str) -> dict[str, Any]:
    """Raw job object, for callers that layer overrides before validation."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = _loads(f.read())
    except OSError as e:
        raise SchemaError(path, f"cannot read job file: {e.strerror}") from None
    if not isinstance(raw, dict):
        raise SchemaError("$", "job must be a JSON object")
    return raw


def load_job(path: str, *, dps: int = DEFAULT_DPS) -> JobConfig:
    return job_from_mapping(load_job_mapping(path), dps=dps)


def job_to_mapping(job: JobConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    out["beta"] = {"digits": job.beta_digits} if job.beta_digits is not None else {"value": job.beta_value}
    if job.table is not None:
        depth = len(next(iter(job.table)))
        out["potential"] = {
            "depth": depth,
            "table": {format_word(w): v for w, v in sorted(job.table.items())},
            "theta": job.theta,
        }
    if job.depth is not None:
        out["depth"] = job.depth
    out["t_grid"] = job.t_grid
    if job.tolerances:
        out["tolerances"] = dict(sorted(job.tolerances.items()))
    out["seed"] = job.seed
    if job.p_max is not None:
        out["p_max"] = job.p_max
    if job.out is not None:
        out["out"] = job.out
    if job.cylinders:
        out["cylinders"] = [format_word(w) for w in job.cylinders]
    if job.pairs is not None:
        out["pairs"] = job.pairs
    if job.profile is not None:
        out["profile"] = job.profile
    return out


def serialize_config(job: JobConfig) -> str:
    """Canonical JSON text (sorted keys) of a parsed job."""
    return json.dumps(job_to_mapping(job), indent=2, sort_keys=True) + "\n"


# Pair files


def _parse_pair_line(line: str, lineno: int, path: str) -> BilateralPair:
    parts = line.split()
    if len(parts) != 2:
        raise SchemaError(f"{path}:{lineno}", "expected '<past> <future>'")
    try:
        return BilateralPair(parse_sequence(parts[0]), parse_sequence(parts[1]))
    except ValueError as e:
        raise SchemaError(f"{path}:{lineno}", str(e)) from None


def load_pairs(path: str) -> list[BilateralPair]:
    """One pair of eventually periodic strings per line; '#' starts a comment."""
    if not os.path.exists(path):
        raise SchemaError("pairs", f"{path} does not exist")
    pairs: list[BilateralPair] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                pairs.append(_parse_pair_line(line, lineno, path))
    return pairs


def parse_pairs_option(option: str) -> tuple[str, int | str]:
    """'random:N' -> ("random", N); 'file:<path>' -> ("file", path)."""
    kind, _, arg = option.partition(":")
    if kind == "random":
        try:
            n = int(arg)
        except ValueError:
            raise SchemaError("pairs", f"expected random:N, got {option!r}") from None
        if n < 1:
            raise SchemaError("pairs", "random:N needs N >= 1")
        return "random", n
    if kind == "file" and arg:
        return "file", arg
    raise SchemaError("pairs", f"expected 'random:N' or 'file:<path>', got {option!r}")

