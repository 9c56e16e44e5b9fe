"""Zero-temperature sweep: m, calibrated sub-actions, gamma, rate functions, LDP limits.

Every t -> inf limit is taken the same way: compute the quantity on a grid of
inverse temperatures and fit value(t) = limit + c/t over the tail of the grid.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from betatherm.beta import BetaSpec, enumerate_language, is_admissible_sequence, is_admissible_word, require_admissible_sequence
from betatherm.config import EngineConfig
from betatherm.errors import (
    BoundaryDivergence,
    DepthMismatch,
    EstimateDivergence,
    IllConditioned,
    NotAdmissible,
    OracleMismatch,
)
from betatherm.involution import (
    CouplingMeasure,
    KernelSpec,
    KernelTable,
    coupling_measure,
    is_bilateral,
    kernel_table,
    kernel_value,
    normalization_constant,
    require_bilateral,
    transpose_potential,
)
from betatherm.oracle import OrbitOptimum, max_orbit_mean
from betatherm.symbolic import (
    BilateralPair,
    EventuallyPeriodicSeq,
    Word,
    format_word,
    padded,
    tau_concat,
)
from betatherm.transfer import (
    TRANSPOSE,
    CylinderFunction,
    Potential,
    SpectralTriple,
    cylinder_basis,
    power_iteration,
)

log = logging.getLogger(__name__)

F_K_LEVELS = (1, 2, 4, 8)


# Temperature grid


@dataclass(frozen=True)
class TemperatureGrid:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty temperature grid")
        if vals[0] <= 1:
            raise ValueError(f"first inverse temperature must exceed 1, got {vals[0]:g}")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("temperature grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def geometric(cls, start: float = 2.0, stop: float = 256.0, ratio: float = 2.0) -> "TemperatureGrid":
        if ratio <= 1:
            raise ValueError("geometric ratio must exceed 1")
        vals = []
        t = float(start)
        while t <= stop * (1 + 1e-12):
            vals.append(t)
            t *= ratio
        return cls(tuple(vals))

    @classmethod
    def parse(cls, text: str) -> "TemperatureGrid":
        """"start:stop:geometric[:ratio]" or a comma list."""
        text = text.strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4) or parts[2].strip().lower() != "geometric":
                raise ValueError(f"expected start:stop:geometric[:ratio], got {text!r}")
            ratio = float(parts[3]) if len(parts) == 4 else 2.0
            return cls.geometric(float(parts[0]), float(parts[1]), ratio)
        return cls(tuple(float(p) for p in text.split(",") if p.strip()))

    @property
    def t_max(self) -> float:
        return self.values[-1]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __str__(self) -> str:
        return ",".join(f"{t:g}" for t in self.values)


# Per-t sweep


@dataclass(frozen=True, eq=False)
class TemperatureSample:
    t: float
    forward: SpectralTriple
    transpose: SpectralTriple
    c: float

    @property
    def log_lambda(self) -> float:
        return self.forward.log_eigenvalue

    @property
    def pressure_rate(self) -> float:
        """(1/t) log lambda_t."""
        return self.forward.log_eigenvalue / self.t

    @property
    def pressure_rate_transpose(self) -> float:
        return self.transpose.log_eigenvalue / self.t

    @property
    def c_rate(self) -> float:
        return self.c / self.t

    @property
    def V_t(self) -> np.ndarray:
        return self.forward.log_psi / self.t

    @property
    def VT_t(self) -> np.ndarray:
        return self.transpose.log_psi / self.t


@dataclass
class SweepStats:
    samples: int = 0
    iterations: int = 0
    max_residual: float = 0.0


def _sample(A: Potential, AT: Potential, table: KernelTable, k: int, spec: BetaSpec, config: EngineConfig, t: float) -> TemperatureSample:
    fwd = power_iteration(A.scaled(t), k, spec, config.tol, config.max_iter, t=t, cap=config.language_cap)
    bwd = power_iteration(AT.scaled(t), k, spec, config.tol, config.max_iter, t=t, cap=config.language_cap)
    c = normalization_constant(table, fwd, bwd)
    log.info(
        "[zerotemp] t=%g log_lambda/t=%.12g transpose=%.12g c/t=%.12g iterations=%d",
        t,
        fwd.log_eigenvalue / t,
        bwd.log_eigenvalue / t,
        c / t,
        max(fwd.iterations, bwd.iterations),
    )
    return TemperatureSample(t, fwd, bwd, c)


def sweep(
    A: Potential,
    grid: TemperatureGrid,
    k: int,
    spec: BetaSpec,
    config: EngineConfig,
    *,
    AT: Potential | None = None,
    table: KernelTable | None = None,
) -> list[TemperatureSample]:
    """Spectral data of tA and tA^T plus c_{tA} at every grid point, in grid order."""
    AT = AT or transpose_potential(A, spec)
    table = table or kernel_table(A, k, spec)
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        samples = list(pool.map(lambda t: _sample(A, AT, table, k, spec, config, t), grid.values))

    stats = SweepStats()
    for s in samples:
        stats.samples += 1
        stats.iterations += s.forward.iterations + s.transpose.iterations
        stats.max_residual = max(stats.max_residual, s.forward.residual, s.transpose.residual)
    log.info(
        "Sweep stats: samples=%d iterations=%d max_residual=%.3e depth=%d",
        stats.samples,
        stats.iterations,
        stats.max_residual,
        k,
    )
    return samples


# Extrapolation


@dataclass(frozen=True, eq=False)
class Extrapolation:
    limit: float | np.ndarray
    slope: float | np.ndarray
    residual: float
    used: int


def extrapolate_limit(
    ts: Sequence[float],
    values: Sequence[float] | np.ndarray,
    *,
    fit_tol: float = 1e-3,
    what: str = "limit",
) -> Extrapolation:
    """Affine fit in 1/t over the last half of the grid (at least 3 points).

    `values` may be 2-D (grid x cylinders); each column is fitted separately.
    """
    x_all = np.asarray(ts, dtype=float)
    y_all = np.asarray(values, dtype=float)
    if len(x_all) < 3:
        raise ValueError("extrapolation needs at least 3 samples")
    if np.any(np.diff(x_all) <= 0):
        raise ValueError("sample temperatures must increase")
    n = max(3, math.ceil(len(x_all) / 2))
    x = 1.0 / x_all[-n:]
    y = y_all[-n:]
    slope, limit = np.polyfit(x, y, 1)
    fit = limit + np.multiply.outer(x, slope)
    residual = float(np.abs(fit - y).max())
    if residual > fit_tol:
        raise IllConditioned(f"{what}: values do not settle like 1/t (fit residual {residual:.3e})", residual)
    if np.ndim(limit) == 0:
        return Extrapolation(float(limit), float(slope), residual, n)
    return Extrapolation(limit, slope, residual, n)


# Maximizing value


@dataclass(frozen=True)
class MaximizingValue:
    m: float
    m_transpose: float
    m_oracle: float | None
    residual: float


def maximizing_value(
    samples: Sequence[TemperatureSample],
    config: EngineConfig,
    oracle: OrbitOptimum | None = None,
) -> MaximizingValue:
    """lim (1/t) log lambda_t, checked against the transpose route and the orbit oracle."""
    ts = [s.t for s in samples]
    fwd = extrapolate_limit(ts, [s.pressure_rate for s in samples], fit_tol=config.fit_tol, what="pressure")
    bwd = extrapolate_limit(ts, [s.pressure_rate_transpose for s in samples], fit_tol=config.fit_tol, what="transpose pressure")
    if abs(fwd.limit - bwd.limit) > config.transpose_tol:
        raise OracleMismatch(f"forward m={fwd.limit:.12g} and transpose m={bwd.limit:.12g} disagree")
    m_oracle = None
    if oracle is not None:
        m_oracle = oracle.m
        if abs(fwd.limit - oracle.m) > config.oracle_tol:
            raise OracleMismatch(f"eigenvalue route m={fwd.limit:.12g} but best cycle mean {oracle.m:.12g}")
    return MaximizingValue(float(fwd.limit), float(bwd.limit), m_oracle, max(fwd.residual, bwd.residual))


# Sub-actions


def calibrated_subactions(samples: Sequence[TemperatureSample], config: EngineConfig) -> tuple[CylinderFunction, CylinderFunction]:
    """V = lim (1/t) log psi_t and V^T likewise, psi_t normalized by sum psi rho = 1."""
    ts = [s.t for s in samples]
    last = samples[-1]
    V = extrapolate_limit(ts, np.array([s.V_t for s in samples]), fit_tol=config.fit_tol, what="V")
    VT = extrapolate_limit(ts, np.array([s.VT_t for s in samples]), fit_tol=config.fit_tol, what="V^T")
    return (
        last.forward.psi.with_values(np.asarray(V.limit)),
        last.transpose.psi.with_values(np.asarray(VT.limit)),
    )


def check_calibration(V: CylinderFunction, A: Potential, m: float, spec: BetaSpec) -> float:
    """max_w |m - (max_a {A(a w) + V(a w)} - V(w))| over depth-k cylinders."""
    if V.depth < A.depth:
        raise DepthMismatch(V.depth, A.depth)
    basis = V.basis or cylinder_basis(spec, V.depth, V.side)
    defect = 0.0
    for i, w in enumerate(basis.words):
        best = max(A.table[((a,) + w)[: A.depth]] + V.values[j] for a, j in basis.branches[i])
        defect = max(defect, abs(m - (best - V.values[i])))
    return defect


# Gamma


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    gamma: float
    gamma_from_c: float
    argmax: tuple[Word, Word]
    argmax_mass: float
    ties: int
    fit_residual: float


def gamma_estimate(
    samples: Sequence[TemperatureSample],
    table: KernelTable,
    V: CylinderFunction,
    VT: CylinderFunction,
    config: EngineConfig,
    coupling: CouplingMeasure | None = None,
) -> GammaEstimate:
    """gamma = sup (W - V - V^T), also read off as lim c_t / t.

    Ties within gamma_tie_tol go to the pair with the largest coupling mass at
    the last grid point.
    """
    ts = [s.t for s in samples]
    route_c = extrapolate_limit(ts, [s.c_rate for s in samples], fit_tol=config.fit_tol, what="c/t")
    D = np.where(table.mask, table.W - V.values[None, :] - VT.values[:, None], -np.inf)
    best = float(D.max())
    tied = np.argwhere(D >= best - config.gamma_tie_tol)
    last = samples[-1]
    coupling = coupling or coupling_measure(table, last.forward, last.transpose)
    i, j = max(((int(a), int(b)) for a, b in tied), key=lambda ij: coupling.masses[ij])
    mass = float(coupling.masses[i, j])
    if abs(route_c.limit - best) > config.gamma_tol:
        raise EstimateDivergence(f"gamma routes disagree: c/t -> {route_c.limit:.9g}, sup(W - V - V^T) = {best:.9g}")
    if mass < config.support_floor:
        log.warning(
            "[warn] gamma argmax (%s, %s) carries coupling mass %.3e below floor %.1e at t=%g",
            table.past.labels[i],
            table.future.labels[j],
            mass,
            config.support_floor,
            last.t,
        )
    return GammaEstimate(best, float(route_c.limit), (table.past_words[i], table.future_words[j]), mass, len(tied), route_c.residual)


# Report


@dataclass(frozen=True, eq=False)
class ZeroTempReport:
    spec: BetaSpec
    A: Potential
    AT: Potential
    k: int
    grid: TemperatureGrid
    samples: tuple[TemperatureSample, ...]
    table: KernelTable
    ks: KernelSpec
    maximizing: MaximizingValue
    V: CylinderFunction
    VT: CylinderFunction
    gamma: GammaEstimate
    calibration_defect: float
    calibration_defect_transpose: float
    oracle: OrbitOptimum
    config: EngineConfig

    @property
    def m(self) -> float:
        return self.maximizing.m

    @property
    def unique_maximizer(self) -> bool:
        return self.oracle.unique

    def summary(self) -> dict:
        return {
            "m": self.m,
            "m_transpose": self.maximizing.m_transpose,
            "m_oracle": self.maximizing.m_oracle,
            "gamma": self.gamma.gamma,
            "gamma_from_c": self.gamma.gamma_from_c,
            "gamma_argmax": [format_word(self.gamma.argmax[0]), format_word(self.gamma.argmax[1])],
            "gamma_argmax_mass": self.gamma.argmax_mass,
            "calibration_defect": self.calibration_defect,
            "calibration_defect_transpose": self.calibration_defect_transpose,
            "unique_maximizer": self.unique_maximizer,
            "argmax_cycles": [str(c) for c in self.oracle.argmax],
            "depth": self.k,
            "t_grid": list(self.grid.values),
        }


def analyze(A: Potential, spec: BetaSpec, k: int, grid: TemperatureGrid, config: EngineConfig) -> ZeroTempReport:
    if len(grid) < 3:
        raise ValueError("zero-temperature analysis needs at least 3 grid points")
    ks = KernelSpec.for_potential(A)
    AT = transpose_potential(A, spec, ks)
    table = kernel_table(A, k, spec, ks)
    samples = sweep(A, grid, k, spec, config, AT=AT, table=table)

    oracle = max_orbit_mean(A, config.p_max, spec, tie_tol=config.tie_tol)
    mv = maximizing_value(samples, config, oracle)
    V, VT = calibrated_subactions(samples, config)
    cal = check_calibration(V, A, mv.m, spec)
    cal_t = check_calibration(VT, AT, mv.m, spec)
    if max(cal, cal_t) > config.fit_tol:
        raise IllConditioned(f"extrapolated sub-actions are not calibrated (defects {cal:.3e}, {cal_t:.3e})", max(cal, cal_t))
    gamma = gamma_estimate(samples, table, V, VT, config)
    if not oracle.unique:
        log.warning("[warn] maximizing cycle not unique: %s", ",".join(str(c) for c in oracle.argmax[:8]))
    log.info(
        "ZeroTemp stats: m=%.12g oracle=%.12g gamma=%.9g gamma_c=%.9g calibration=%.3e/%.3e unique=%s",
        mv.m,
        oracle.m,
        gamma.gamma,
        gamma.gamma_from_c,
        cal,
        cal_t,
        oracle.unique,
    )
    return ZeroTempReport(
        spec=spec,
        A=A,
        AT=AT,
        k=k,
        grid=grid,
        samples=tuple(samples),
        table=table,
        ks=ks,
        maximizing=mv,
        V=V,
        VT=VT,
        gamma=gamma,
        calibration_defect=cal,
        calibration_defect_transpose=cal_t,
        oracle=oracle,
        config=config,
    )


# Rate function


@dataclass(frozen=True)
class RateValue:
    point: EventuallyPeriodicSeq
    value: float
    preperiod_sum: float
    period_defect: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def rate_function(
    x: EventuallyPeriodicSeq,
    V: CylinderFunction,
    A: Potential,
    m: float,
    spec: BetaSpec,
    *,
    tol_zero: float = 1e-9,
) -> RateValue:
    """I(x) = -sum_j (V o sigma - V - A + m)(sigma^j x), exact on eventually periodic x.

    Along the period the terms sum to -(sum of A - m); a negative period sum
    sends I to -inf, otherwise every periodic term vanishes and only the
    preperiod counts.
    """
    require_admissible_sequence(x, spec)
    pre = 0.0
    for j in range(len(x.preperiod)):
        z = x.shift(j)
        pre += V.at(z.shift(1)) - V.at(z) - A(z) + m
    cycle = x.shift(len(x.preperiod))
    defect = sum(A(cycle.shift(i)) for i in range(len(x.period))) - len(x.period) * m
    if defect < -tol_zero:
        return RateValue(x, -math.inf, -pre, defect)
    return RateValue(x, -pre, -pre, defect)


def rate_value(x: EventuallyPeriodicSeq, report: ZeroTempReport) -> RateValue:
    return rate_function(x, report.V, report.A, report.m, report.spec, tol_zero=report.config.tol_zero)


def _transpose_terms(pair: BilateralPair, k: int, report: ZeroTempReport) -> list[float]:
    """(V^T o sigma - V^T - A^T + m)(tau_{x,j+1} y) for j < k; each >= 0 up to tol."""
    VT, AT, m = report.VT, report.AT, report.m
    y, x = pair.past, pair.future
    out = []
    prev = VT.at(y)
    for j in range(k):
        nxt_point = tau_concat(x, j + 1, y)
        nxt = VT.at(nxt_point)
        out.append(prev - nxt - AT(nxt_point) + m)
        prev = nxt
    return out


def _pair_reach(k: int, report: ZeroTempReport) -> int:
    return k + max(report.k, report.A.depth)


def evaluate_F_k(pair: BilateralPair, k: int, report: ZeroTempReport) -> float:
    """F_k(y, x) = -gamma + W - V(x) - V^T(y) - sum_{j<k} (V^T o sigma - V^T - A^T + m)(tau_{x,j+1} y)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    require_bilateral(pair.past, pair.future, report.spec, reach=_pair_reach(k, report))
    W = kernel_value(report.A, pair.past, pair.future, report.ks)
    head = -report.gamma.gamma + W - report.V.at(pair.future) - report.VT.at(pair.past)
    return head - sum(_transpose_terms(pair, k, report))


@dataclass(frozen=True)
class BilateralRate:
    value: float
    rate: float
    boundary: float
    gap: float


def rate_function_bilateral(
    pair: BilateralPair,
    report: ZeroTempReport,
    k_max: int = 64,
    *,
    tol: float = 1e-6,
) -> BilateralRate:
    """Rate function of the natural extension, telescoped through the kernel:

        I^(y, x) = B_k - W(y, x) + V(x) + V^T(y) - sum_{j<k} (V^T o sigma - V^T - A^T + m)(tau_{x,j+1} y)

    with boundary term B_k = W(tau_{x,k} y, sigma^k x) - V(sigma^k x) - V^T(tau_{x,k} y).
    It must agree with I(x); B_k must settle at gamma under a unique maximizer.
    """
    y, x = pair.past, pair.future
    require_bilateral(y, x, report.spec, reach=_pair_reach(k_max, report))
    rate = rate_value(x, report)
    if not rate.finite:
        return BilateralRate(-math.inf, -math.inf, math.nan, math.nan)
    yk, xk = tau_concat(x, k_max, y), x.shift(k_max)
    boundary = kernel_value(report.A, yk, xk, report.ks) - report.V.at(xk) - report.VT.at(yk)
    W = kernel_value(report.A, y, x, report.ks)
    value = boundary - W + report.V.at(x) + report.VT.at(y) - sum(_transpose_terms(pair, k_max, report))
    gap = abs(value - rate.value)
    if gap > tol:
        raise EstimateDivergence(f"natural-extension rate {value:.9g} differs from I(x) = {rate.value:.9g} at {pair}")
    if report.unique_maximizer and abs(boundary - report.gamma.gamma) > report.config.boundary_tol:
        raise BoundaryDivergence(
            f"boundary term {boundary:.9g} has not reached gamma = {report.gamma.gamma:.9g} by k={k_max} at {pair}"
        )
    return BilateralRate(value, rate.value, boundary, gap)


# Cylinder LDP


@dataclass(frozen=True, eq=False)
class LdpResult:
    word: Word
    empirical_limit: float
    fit_residual: float
    sup_I: float
    witness: EventuallyPeriodicSeq | None
    gap: float
    series: tuple[tuple[float, float], ...]
    F_sup: dict[int, float] = field(default_factory=dict)
    unique_maximizer: bool = True

    def summary(self) -> dict:
        return {
            "cylinder": format_word(self.word),
            "empirical_limit": self.empirical_limit,
            "fit_residual": self.fit_residual,
            "sup_I": self.sup_I,
            "gap": self.gap,
            "witness_point": None if self.witness is None else str(self.witness),
            "F_k_sup": {str(k): v for k, v in sorted(self.F_sup.items())},
            "unique_maximizer": self.unique_maximizer,
        }


def log_cylinder_mass(sample: TemperatureSample, w: Word) -> float:
    sel = np.array([v[: len(w)] == w for v in sample.forward.words])
    return float(logsumexp(sample.forward.log_gibbs[sel]))


def ldp_candidates(w: Word, report: ZeroTempReport) -> list[EventuallyPeriodicSeq]:
    """w b c^inf for bridges |b| <= B into each rotation c of the maximizing cycles, plus w 0^inf."""
    period = max(c.period for c in report.oracle.argmax)
    B = report.config.bridge_factor * (report.spec.spec_gap.n0 + period)
    rotations = sorted({r for c in report.oracle.argmax for r in c.rotations()})
    seen: set[EventuallyPeriodicSeq] = set()
    out: list[EventuallyPeriodicSeq] = []
    options = [padded(w)]
    for j in range(B + 1):
        for b in enumerate_language(j, report.spec, cap=report.config.language_cap):
            options.extend(EventuallyPeriodicSeq(w + b, c) for c in rotations)
    for x in options:
        if x not in seen and is_admissible_sequence(x, report.spec):
            seen.add(x)
            out.append(x)
    return out


def ldp_cylinder_limit(w: Sequence[int], report: ZeroTempReport) -> LdpResult:
    """Empirical lim (1/t) log mu_t([w]) against sup of I over [w]."""
    w = tuple(w)
    if not w or not is_admissible_word(w, report.spec):
        raise NotAdmissible(f"cylinder {format_word(w)!r} is not admissible")
    if len(w) > report.k:
        raise DepthMismatch(report.k, len(w))
    if not report.unique_maximizer:
        log.warning(
            "[warn] ldp %s: maximizing measure is not unique; limit reported without that hypothesis",
            format_word(w),
        )

    series = tuple((s.t, log_cylinder_mass(s, w) / s.t) for s in report.samples)
    ext = extrapolate_limit([t for t, _ in series], [v for _, v in series], fit_tol=report.config.fit_tol, what=f"cylinder {format_word(w)}")

    candidates = ldp_candidates(w, report)
    rates = [r for r in (rate_value(x, report) for x in candidates) if r.finite]
    best = max(rates, key=lambda r: r.value, default=None)
    sup_I = best.value if best is not None else -math.inf
    gap = abs(ext.limit - sup_I) if best is not None else math.inf

    F_sup: dict[int, float] = {}
    pasts = cylinder_basis(report.spec, report.k, TRANSPOSE).representatives
    finite = [r.point for r in rates] or [padded(w)]
    for level in F_K_LEVELS:
        vals = [
            evaluate_F_k(BilateralPair(y, x), level, report)
            for y in pasts
            for x in finite
            if is_bilateral(y, x, report.spec, reach=_pair_reach(level, report))
        ]
        F_sup[level] = max(vals) if vals else -math.inf

    log.info(
        "[ldp] %s empirical=%.9g sup_I=%.9g gap=%.3e witness=%s candidates=%d",
        format_word(w),
        ext.limit,
        sup_I,
        gap,
        best.point if best is not None else None,
        len(candidates),
    )
    return LdpResult(
        word=w,
        empirical_limit=float(ext.limit),
        fit_residual=ext.residual,
        sup_I=sup_I,
        witness=best.point if best is not None else None,
        gap=gap,
        series=series,
        F_sup=F_sup,
        unique_maximizer=report.unique_maximizer,
    )
