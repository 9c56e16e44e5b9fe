"""Subcommand runners: one function per command, each returning a payload.

Files are written only when the job names an output directory; stdout
rendering is left to the caller.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from betatherm.beta import (
    count_words_by_presentation,
    enumerate_language,
    greedy_expansion,
    is_admissible_on,
    is_admissible_sequence,
)
from betatherm.config import EngineConfig, apply_overrides, apply_profile, load_config
from betatherm.errors import BetaThermError, NonUniqueMaximizer, SchemaError, UnknownAtDepth
from betatherm.involution import (
    KernelSpec,
    check_duality,
    check_marginals,
    coupling_measure,
    eigenfunction_from_kernel,
    involution_kernel,
    kernel_table,
    random_bilateral_pairs,
    transpose_potential,
)
from betatherm.jobs import JobConfig, load_pairs, parse_pairs_option
from betatherm.oracle import max_orbit_mean, necklace_count
from betatherm.storage import ResultStore
from betatherm.symbolic import BilateralPair, format_word, parse_sequence, parse_word
from betatherm.transfer import FORWARD, TRANSPOSE, Potential, SpectralTriple, power_iteration
from betatherm.zerotemp import TemperatureGrid, ZeroTempReport, analyze, ldp_cylinder_limit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommandOptions:
    """Per-command flags that are not part of a job file."""

    n: int = 16
    greedy: bool = False
    alpha: str = "1"
    word: str | None = None
    sequence: str | None = None
    transpose: bool = False
    count_only: bool = False
    t: float = 1.0


@dataclass(frozen=True)
class CommandResult:
    command: str
    payload: dict
    text: str
    artifacts: tuple[str, ...] = ()
    # raised after output so results are still emitted (non-unique maximizer)
    failure: BetaThermError | None = None

    @property
    def exit_code(self) -> int:
        return 0 if self.failure is None else self.failure.exit_code


def engine_config_for(job: JobConfig, base: EngineConfig | None = None) -> EngineConfig:
    """env defaults -> job profile -> job tolerances -> job seed."""
    config = base or load_config()
    if job.profile:
        config = apply_profile(config, job.profile)
    config = apply_overrides(config, job.tolerances)
    if job.p_max is not None:
        config = replace(config, p_max=job.p_max)
    return replace(config, seed=job.seed)


def _require_potential(job: JobConfig) -> Potential:
    if job.potential is None:
        raise SchemaError("potential", "missing (this command needs a potential table)")
    return job.potential


def _depth(job: JobConfig, A: Potential) -> int:
    return job.depth if job.depth is not None else A.depth


def _store(job: JobConfig) -> ResultStore | None:
    return ResultStore(job.out) if job.out else None


def _kv_lines(title: str, items: dict) -> str:
    lines = [title]
    for key in sorted(items):
        value = items[key]
        if isinstance(value, float):
            value = f"{value:.12g}"
        lines.append(f"  {key}: {value}")
    return "\n".join(lines)


# Symbolic commands


def run_expand(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    spec = job.spec
    if opts.n < 1:
        raise SchemaError("n", "must be >= 1")
    if opts.greedy:
        try:
            digits = greedy_expansion(opts.alpha, spec.beta_hp or spec.beta, opts.n, dps=config.working_dps, guard=config.digit_guard)
        except ValueError as e:
            raise SchemaError("alpha", str(e)) from None
        kind = f"greedy({opts.alpha})"
    else:
        digits = spec.xbeta_prefix(opts.n)
        kind = "quasi-greedy(1)"
    payload = {
        "beta": spec.beta,
        "x_beta": str(spec.xbeta) if spec.xbeta is not None else None,
        "expansion": kind,
        "n": opts.n,
        "digits": format_word(digits),
        "specification_gap": spec.spec_gap.n0,
        "gap_exact": spec.spec_gap.exact,
    }
    text = f"{kind} beta={spec.beta:.15g} n={opts.n}\n{format_word(digits)}"
    return CommandResult("expand", payload, text)


def run_admissible(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    spec = job.spec
    side = TRANSPOSE if opts.transpose else FORWARD
    try:
        if opts.sequence is not None:
            x = parse_sequence(opts.sequence)
            if opts.transpose:
                raise SchemaError("sequence", "sequence admissibility is checked on the forward shift only")
            ok, subject = is_admissible_sequence(x, spec), str(x)
        elif opts.word is not None:
            w = parse_word(opts.word)
            ok, subject = is_admissible_on(w, spec, side), format_word(w)
        else:
            raise SchemaError("word", "give --word or --sequence")
    except ValueError as e:
        raise SchemaError("word", str(e)) from None
    payload = {"subject": subject, "side": side, "admissible": ok, "x_beta": str(spec.xbeta) if spec.xbeta else None}
    text = f"{subject} ({side}): {'admissible' if ok else 'NOT admissible'}"
    return CommandResult("admissible", payload, text)


def run_language(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    spec = job.spec
    if opts.n < 0:
        raise SchemaError("n", "must be >= 0")
    words = enumerate_language(opts.n, spec, transpose=opts.transpose, cap=config.language_cap)
    try:
        by_presentation: int | None = count_words_by_presentation(opts.n, spec)
    except UnknownAtDepth:
        by_presentation = None
    payload: dict = {
        "n": opts.n,
        "side": TRANSPOSE if opts.transpose else FORWARD,
        "count": len(words),
        "presentation_count": by_presentation,
        "growth_rate": math.log(len(words)) / opts.n if opts.n and words else None,
        "log_beta": math.log(spec.beta),
    }
    if not opts.count_only:
        payload["words"] = [format_word(w) for w in words]
    if by_presentation is not None and by_presentation != len(words):
        log.warning("[language] n=%d enumeration=%d presentation=%d", opts.n, len(words), by_presentation)
    text = f"n={opts.n} words={len(words)} presentation={by_presentation}"
    if not opts.count_only:
        text += "\n" + "\n".join(format_word(w) for w in words)
    return CommandResult("language", payload, text)


# Spectral commands


def _spectral_rows(tr: SpectralTriple) -> list[tuple]:
    return [
        (label, float(p), float(r), float(g))
        for label, p, r, g in zip(tr.psi.labels, tr.psi.values, tr.rho.values, tr.gibbs.values)
    ]


def format_spectrum_table(tr: SpectralTriple, limit: int = 20) -> str:
    lines = [f"lambda={tr.eigenvalue:.15g} log_lambda={tr.log_eigenvalue:.15g} residual={tr.residual:.3e} iterations={tr.iterations}"]
    lines.append("WORD | PSI | RHO | GIBBS")
    lines.append("-" * 60)
    rows = sorted(_spectral_rows(tr), key=lambda r: -r[3])[:limit]
    for w, p, r, g in rows:
        lines.append(f"{w:<12} | {p:.6e} | {r:.6e} | {g:.6e}")
    return "\n".join(lines)


def run_spectrum(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    A = _require_potential(job)
    k = _depth(job, A)
    tr = power_iteration(A.scaled(opts.t), k, job.spec, config.tol, config.max_iter, t=opts.t, cap=config.language_cap)
    log.info("[spectrum] t=%g depth=%d lambda=%.15g iterations=%d", opts.t, k, tr.eigenvalue, tr.iterations)
    payload = {
        "lambda": tr.eigenvalue,
        "log_lambda": tr.log_eigenvalue,
        "residual": tr.residual,
        "iterations": tr.iterations,
        "depth": k,
        "t": opts.t,
        "cylinders": len(tr.words),
    }
    artifacts: list[str] = []
    store = _store(job)
    if store is not None:
        artifacts.append(store.write_csv("spectrum.csv", ("word", "psi", "rho", "gibbs"), _spectral_rows(tr)))
        artifacts.append(store.write_json("spectrum.json", payload))
    return CommandResult("spectrum", payload, format_spectrum_table(tr), tuple(artifacts))


def _pairs_for(job: JobConfig, config: EngineConfig, k: int) -> list[BilateralPair]:
    kind, arg = parse_pairs_option(job.pairs or "random:100")
    if kind == "file":
        return load_pairs(str(arg))
    rng = np.random.default_rng(config.seed)
    return random_bilateral_pairs(job.spec, int(arg), k, rng, periodic_tails=True)


def run_involution(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    A = _require_potential(job)
    spec = job.spec
    k = _depth(job, A)
    ks = KernelSpec.for_potential(A)
    AT = transpose_potential(A, spec, ks)
    table = kernel_table(A, k, spec, ks)
    fwd = power_iteration(A.scaled(opts.t), k, spec, config.tol, config.max_iter, t=opts.t, cap=config.language_cap)
    bwd = power_iteration(AT.scaled(opts.t), k, spec, config.tol, config.max_iter, t=opts.t, cap=config.language_cap)
    cm = coupling_measure(table, fwd, bwd)
    past_defect, future_defect = check_marginals(cm, bwd.gibbs, fwd.gibbs)
    eigenfunction_from_kernel(table, fwd, bwd, tol=config.eigen_tol)

    pairs = _pairs_for(job, config, k)
    residuals = [check_duality(A, p.past, p.future, spec, AT=AT, ks=ks) for p in pairs]
    kernel_rows = [(str(p.past), str(p.future), involution_kernel(A, p.past, p.future, ks, spec)) for p in pairs]
    duality = max(residuals) if residuals else 0.0
    log.info(
        "Involution stats: pairs=%d duality=%.3e marginals=%.3e/%.3e c=%.12g",
        len(pairs),
        duality,
        past_defect,
        future_defect,
        cm.c,
    )
    payload = {
        "c_A": cm.c,
        "t": opts.t,
        "depth": k,
        "lambda": fwd.eigenvalue,
        "lambda_transpose": bwd.eigenvalue,
        "duality_max_residual": duality,
        "pairs": len(pairs),
        "marginal_defects": {"past": past_defect, "future": future_defect},
        "kernel_exact": ks.exact,
        "transpose_table": {format_word(w): v for w, v in sorted(AT.table.items())},
    }
    artifacts: list[str] = []
    store = _store(job)
    if store is not None:
        artifacts.append(store.write_csv("kernel.csv", ("past", "future", "W"), kernel_rows))
        artifacts.append(store.write_json("involution.json", payload))
    return CommandResult("involution", payload, _kv_lines("INVOLUTION", {k_: v for k_, v in payload.items() if k_ != "transpose_table"}), tuple(artifacts))


# Zero temperature


def _zerotemp_rows(report: ZeroTempReport) -> list[tuple]:
    return [
        (s.t, s.forward.eigenvalue, s.pressure_rate, s.pressure_rate_transpose, s.c_rate)
        for s in report.samples
    ]


def format_zerotemp_table(report: ZeroTempReport) -> str:
    lines = ["T | LOG_LAMBDA/T | TRANSPOSE | C/T"]
    lines.append("-" * 64)
    for t, _, rate, rate_t, c_rate in _zerotemp_rows(report):
        lines.append(f"{t:<8g} | {rate:+.12f} | {rate_t:+.12f} | {c_rate:+.9f}")
    s = report.summary()
    lines.append(
        f"m={s['m']:.12g} gamma={s['gamma']:.9g} calibration={s['calibration_defect']:.3e} "
        f"unique={s['unique_maximizer']} argmax={','.join(s['argmax_cycles'])}"
    )
    return "\n".join(lines)


def _analyze(job: JobConfig, config: EngineConfig) -> ZeroTempReport:
    A = _require_potential(job)
    try:
        grid = TemperatureGrid.parse(job.t_grid)
    except ValueError as e:
        raise SchemaError("t_grid", str(e)) from None
    return analyze(A, job.spec, _depth(job, A), grid, config)


def run_zerotemp(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    report = _analyze(job, config)
    payload = report.summary()
    artifacts: list[str] = []
    store = _store(job)
    if store is not None:
        artifacts.append(
            store.write_csv(
                "zerotemp.csv",
                ("t", "lambda", "log_lambda_over_t", "log_lambda_transpose_over_t", "c_over_t"),
                _zerotemp_rows(report),
            )
        )
        artifacts.append(
            store.write_csv("subactions.csv", ("word", "V"), list(zip(report.V.labels, map(float, report.V.values))))
        )
        artifacts.append(
            store.write_csv(
                "subactions_transpose.csv",
                ("word", "V_transpose"),
                list(zip(report.VT.labels, map(float, report.VT.values))),
            )
        )
        artifacts.append(store.write_json("zerotemp.json", payload))
    return CommandResult("zerotemp", payload, format_zerotemp_table(report), tuple(artifacts))


def format_ldp_table(results: list[dict]) -> str:
    if not results:
        return "No cylinders."
    lines = ["CYLINDER | EMPIRICAL | SUP_I | GAP | WITNESS"]
    lines.append("-" * 72)
    for r in results:
        lines.append(
            f"{r['cylinder']:<10} | {r['empirical_limit']:+.9f} | {r['sup_I']:+.9f} | {r['gap']:.3e} | {r['witness_point']}"
        )
    return "\n".join(lines)


def run_ldp(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    if not job.cylinders:
        raise SchemaError("cylinders", "ldp needs at least one cylinder")
    report = _analyze(job, config)
    results = [ldp_cylinder_limit(w, report) for w in job.cylinders]
    summaries = [r.summary() for r in results]
    payload = {
        "m": report.m,
        "gamma": report.gamma.gamma,
        "depth": report.k,
        "unique_maximizer": report.unique_maximizer,
        "cylinders": summaries,
    }
    artifacts: list[str] = []
    store = _store(job)
    if store is not None:
        for r in results:
            artifacts.append(store.write_csv(f"ldp_{format_word(r.word)}.csv", ("t", "value"), r.series))
        artifacts.append(store.write_json("ldp.json", payload))
    failure = None
    if not report.unique_maximizer:
        failure = NonUniqueMaximizer(
            "maximizing measure is not unique: " + ",".join(str(c) for c in report.oracle.argmax[:8])
        )
    return CommandResult("ldp", payload, format_ldp_table(summaries), tuple(artifacts), failure)


def format_oracle_table(payload: dict) -> str:
    lines = [f"m={payload['m']:.15g} p_max={payload['p_max']} cycles={payload['n_cycles']} unique={payload['unique']}"]
    lines.append("ARGMAX CYCLES: " + ", ".join(payload["argmax_cycles"]))
    return "\n".join(lines)


def run_oracle(job: JobConfig, config: EngineConfig, opts: CommandOptions) -> CommandResult:
    A = _require_potential(job)
    opt = max_orbit_mean(A, config.p_max, job.spec, tie_tol=config.tie_tol)
    payload: dict = {
        "m": opt.m,
        "argmax_cycles": [str(c) for c in opt.argmax],
        "unique": opt.unique,
        "n_cycles": opt.n_cycles,
        "p_max": config.p_max,
    }
    if job.spec.is_periodic:
        payload["cycles_by_presentation"] = sum(necklace_count(p, job.spec) for p in range(1, config.p_max + 1))
    store = _store(job)
    artifacts = (store.write_json("oracle.json", payload),) if store is not None else ()
    return CommandResult("oracle", payload, format_oracle_table(payload), artifacts)


_RUNNERS: dict[str, Callable[[JobConfig, EngineConfig, CommandOptions], CommandResult]] = {
    "expand": run_expand,
    "admissible": run_admissible,
    "language": run_language,
    "spectrum": run_spectrum,
    "involution": run_involution,
    "zerotemp": run_zerotemp,
    "ldp": run_ldp,
    "oracle": run_oracle,
}


def run_pipeline(
    job: JobConfig,
    command: str,
    config: EngineConfig | None = None,
    options: CommandOptions | None = None,
) -> CommandResult:
    """Run one subcommand; module errors propagate with their family exit codes."""
    if command not in _RUNNERS:
        raise SchemaError("command", f"unknown command {command!r}")
    config = config or engine_config_for(job)
    result = _RUNNERS[command](job, config, options or CommandOptions())
    for path in result.artifacts:
        log.info("[%s] wrote %s", command, path)
    return result
