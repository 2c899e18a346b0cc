"""Life-span sweeps in the amplitude, scaling fits and the singular-strength dichotomy.

For mu = lambda * phi with phi = (1 + |x|)^{-A}, the blow-up time T(lambda)
grows like a power of 1/lambda (or like exp of one in the Fujita-critical
case) as lambda -> 0.  ``lifespan_sweep`` measures T(lambda) with the marching
solver on boxes that scale with the predicted T, and ``fit_scaling`` compares
the slope in the regime's coordinates with the theoretical one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Grid
from .kernel import ModelParams
from .semigroup import Constant, CriticalLog, InitialDatum, PowerLaw, Singular
from .solver import TimeMesh, blowup_ball_profile, march

__all__ = [
    "ScalingLaw",
    "SweepConfig",
    "SweepRecord",
    "FitResult",
    "DichotomyResult",
    "predicted_exponent",
    "lifespan_sweep",
    "fit_scaling",
    "log_law_smoke",
    "blowup_profile",
    "dichotomy_probe",
    "save_sweep_csv",
    "save_plot_data",
]


# -- theory ------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingLaw:
    """Which small-amplitude law applies, and its slope in fit coordinates.

    ``regime`` is one of ``power`` (log T vs log lambda), ``power_log``
    (log T vs log(lambda^{-1}/log lambda^{-1})), ``log`` and ``log_A_eq_N``
    (log log T vs log lambda), ``global`` (no blow-up for small lambda) or
    ``boundary`` (A = theta/(p-1) in the supercritical range, not covered).
    """

    regime: str
    exponent: Optional[float]
    theory_slope: Optional[float]
    coordinates: str

    def predict(self, lam_ref: float, T_ref: float, lam: float) -> float:
        """Transport an observed (lambda, T) pair to another lambda along the law."""
        if self.theory_slope is None or lam <= 0:
            return T_ref
        if self.regime == "power":
            return T_ref * (lam / lam_ref) ** self.theory_slope
        if self.regime == "power_log":
            return T_ref * (_log_corrected(lam) / _log_corrected(lam_ref)) ** self.theory_slope
        lt = math.log(max(T_ref, math.e)) * (lam / lam_ref) ** self.theory_slope
        return math.exp(min(lt, 700.0))

    def to_dict(self) -> dict:
        return asdict(self)


def _log_corrected(lam: float) -> float:
    return (1.0 / lam) / math.log(1.0 / lam)


def predicted_exponent(params: ModelParams, A: float) -> ScalingLaw:
    if not A > 0:
        raise ValueError("decay rate A must be positive")
    N, theta, p = params.N, params.theta, params.p
    regime = params.regime
    a_self = theta / (p - 1.0)
    if regime == "supercritical":
        if math.isclose(A, a_self, rel_tol=1e-12):
            return ScalingLaw("boundary", None, None, "none")
        if A > a_self:
            return ScalingLaw("global", None, None, "none")
    if regime == "critical" and A >= N * (1 - 1e-12):
        if math.isclose(A, N, rel_tol=1e-12):
            return ScalingLaw("log_A_eq_N", (p - 1.0) / p, -(p - 1.0) / p, "loglogT_vs_loglambda")
        return ScalingLaw("log", p - 1.0, -(p - 1.0), "loglogT_vs_loglambda")
    e = 1.0 / (1.0 / (p - 1.0) - min(A, N) / theta)
    if math.isclose(A, N, rel_tol=1e-12):
        return ScalingLaw("power_log", e, e, "logT_vs_log_lambdainv_over_loglambdainv")
    return ScalingLaw("power", e, -e, "logT_vs_loglambda")


# -- sweeps --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """Per-run resolution and the box/horizon budget rules.

    The box half-width is max(box_factor T_pred^{1/theta}, 4 decay_length) and
    the horizon cap is horizon_factor T_pred.  With ``h_max`` set, M is raised
    (up to ``M_max``) until the spacing resolves the datum's unit scale.
    """

    M: int = 4096
    K: int = 512
    q: float = 1.0
    box_factor: float = 8.0
    horizon_factor: float = 10.0
    decay_length: float = 1.0
    h_max: Optional[float] = None
    M_max: int = 65536
    rtol: float = 1e-4
    bracket_rtol: float = 5e-3
    recentre: tuple = (0.5, 2.0)
    max_escalations: int = 8

    def __post_init__(self):
        if self.box_factor <= 0 or self.horizon_factor <= 1:
            raise ValueError("box_factor must be > 0 and horizon_factor > 1")
        if not 0 < self.recentre[0] < 1 < self.recentre[1]:
            raise ValueError("recentre window must straddle 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recentre"] = list(self.recentre)
        return d


@dataclass
class SweepRecord:
    amplitude: float
    status: str
    T_est: Optional[float]
    bracket: Optional[tuple]
    T_pred: float
    grid: dict
    mesh: dict
    diagnostics: dict = field(default_factory=dict)
    flag: str = ""

    @property
    def usable(self) -> bool:
        return self.status == "blow_up" and self.T_est is not None and self.T_est > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket) if self.bracket else None
        return d


def _decay_rate(phi) -> float:
    if isinstance(phi, Constant):
        return 0.0
    if isinstance(phi, PowerLaw):
        return phi.A
    raise ValueError("sweeps support Constant and PowerLaw profiles")


def _resolution(T_pred: float, params: ModelParams, cfg: SweepConfig, constant: bool):
    L = max(cfg.box_factor * T_pred ** (1.0 / params.theta), 4.0 * cfg.decay_length)
    M = cfg.M
    if cfg.h_max is not None and not constant:
        while 2.0 * L / M > cfg.h_max and M < cfg.M_max:
            M *= 2
    return Grid(params.N, L, M), TimeMesh(cfg.horizon_factor * T_pred, cfg.K, cfg.q)


def _run_one(phi, lam: float, T_pred: float, params: ModelParams, cfg: SweepConfig) -> SweepRecord:
    datum = InitialDatum(closed_form=phi, amplitude=lam)
    constant = isinstance(phi, Constant)
    if lam == 0.0:
        grid, mesh = _resolution(T_pred, params, cfg, constant)
        return SweepRecord(0.0, "completed", None, None, T_pred, grid.to_dict(), mesh.to_dict(), {}, "zero datum")
    recentred = False
    for _ in range(cfg.max_escalations + 1):
        grid, mesh = _resolution(T_pred, params, cfg, constant)
        out = march(datum, params, mesh, grid, rtol=cfg.rtol, bracket_rtol=cfg.bracket_rtol, box_factor=0.0)
        diag = dict(out.diagnostics)
        if out.status == "diverged":
            return SweepRecord(lam, "diverged", None, None, T_pred, grid.to_dict(), mesh.to_dict(), diag, "diverged")
        if out.blew_up:
            ratio = out.T_est / T_pred
            if not recentred and not constant and not cfg.recentre[0] <= ratio <= cfg.recentre[1]:
                T_pred, recentred = out.T_est, True
                continue
            flag = "recentred" if recentred else ""
            bracket = tuple(float(b) for b in out.bracket)
            return SweepRecord(lam, "blow_up", float(out.T_est), bracket, T_pred, grid.to_dict(), mesh.to_dict(), diag, flag)
        T_pred *= cfg.horizon_factor
    return SweepRecord(lam, "completed", None, None, T_pred, grid.to_dict(), mesh.to_dict(), diag, "horizon_cap")


def _ode_time(phi, lam: float, p: float) -> float:
    top = phi.c if isinstance(phi, Constant) else 1.0
    return (lam * top) ** (1.0 - p) / (p - 1.0)


def lifespan_sweep(
    phi,
    lambdas: Sequence[float],
    params: ModelParams,
    config: SweepConfig | None = None,
    jobs: int = 1,
) -> list[SweepRecord]:
    """One record per amplitude, sorted by amplitude.

    The largest amplitude is run first starting from the ODE life span of its
    peak value; the remaining budgets are transported from that anchor along
    the theoretical law and escalated by ``horizon_factor`` when a run reaches
    its cap.  A run whose T_est lands outside the ``recentre`` window of its
    prediction is repeated once on a box built for T_est, so every recorded
    run sees the same box-to-lifespan ratio.
    """
    cfg = config or SweepConfig()
    A = _decay_rate(phi)
    lams = sorted(float(x) for x in lambdas)
    if any(x < 0 for x in lams):
        raise ValueError("amplitudes must be nonnegative")
    law = predicted_exponent(params, A) if A > 0 else ScalingLaw("power", params.p - 1.0, -(params.p - 1.0), "logT_vs_loglambda")
    positive = [x for x in lams if x > 0]
    records: dict[float, SweepRecord] = {}
    if 0.0 in lams:
        records[0.0] = _run_one(phi, 0.0, 1.0, params, cfg)
    if not positive:
        return [records[0.0]]
    top = positive[-1]
    first = _run_one(phi, top, _ode_time(phi, top, params.p), params, cfg)
    records[top] = first
    anchor_T = first.T_est if first.usable else first.T_pred
    rest = positive[:-1]
    preds = [law.predict(top, anchor_T, lam) for lam in rest]
    if jobs > 1 and len(rest) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, phi, lam, T, params, cfg) for lam, T in zip(rest, preds)]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(phi, lam, T, params, cfg) for lam, T in zip(rest, preds)]
    for rec in results:
        records[rec.amplitude] = rec
    return [records[k] for k in sorted(records)]


def monotone_violations(records: Sequence[SweepRecord]) -> list[tuple]:
    """Consecutive usable pairs where T grows with lambda beyond one bracket width."""
    usable = [r for r in records if r.usable]
    bad = []
    for lo, hi in zip(usable, usable[1:]):
        slack = hi.bracket[1] - hi.bracket[0] if hi.bracket else 0.0
        if hi.T_est > lo.T_est + slack:
            bad.append((lo.amplitude, hi.amplitude))
    return bad


# -- fitting ---------------------------------------------------------------------------


@dataclass
class FitResult:
    regime: str
    coordinates: str
    slope: float
    intercept: float
    residual: float  # max relative deviation of fitted T from measured T
    theory_slope: Optional[float]
    n_used: int
    lambda_span_decades: float
    slope_without_largest: Optional[float] = None
    points: list = field(default_factory=list)

    @property
    def relative_error(self) -> Optional[float]:
        if self.theory_slope in (None, 0):
            return None
        return abs(self.slope - self.theory_slope) / abs(self.theory_slope)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relative_error"] = self.relative_error
        return d


def _coords(law: ScalingLaw, lam: np.ndarray, T: np.ndarray):
    if law.regime in ("log", "log_A_eq_N"):
        if np.any(T <= math.e):
            raise ValueError("log-law coordinates need T > e")
        return np.log(lam), np.log(np.log(T))
    if law.regime == "power_log":
        if np.any(lam >= 1.0 / math.e):
            raise ValueError("log-corrected coordinates need lambda < 1/e")
        return np.log((1.0 / lam) / np.log(1.0 / lam)), np.log(T)
    return np.log(lam), np.log(T)


def _uncoords(law: ScalingLaw, y: np.ndarray) -> np.ndarray:
    if law.regime in ("log", "log_A_eq_N"):
        return np.exp(np.exp(y))
    return np.exp(y)


def fit_scaling(
    records: Sequence[SweepRecord],
    law: ScalingLaw,
    min_records: int = 4,
    min_decades: float = 1.0,
) -> FitResult:
    usable = sorted((r for r in records if r.usable), key=lambda r: r.amplitude)
    if law.regime in ("global", "boundary"):
        raise ValueError(f"no blow-up law to fit in regime {law.regime!r}")
    if len(usable) < min_records:
        raise ValueError(f"need at least {min_records} blow-up records, got {len(usable)}")
    lam = np.array([r.amplitude for r in usable])
    T = np.array([r.T_est for r in usable])
    span = math.log10(lam[-1] / lam[0])
    if span < min_decades * (1 - 1e-9):
        raise ValueError(f"amplitudes span {span:.3g} decades, need {min_decades}")
    x, y = _coords(law, lam, T)
    slope, intercept = np.polyfit(x, y, 1)
    T_fit = _uncoords(law, slope * x + intercept)
    residual = float(np.max(np.abs(T_fit / T - 1.0)))
    drop = None
    if len(x) >= 3:
        drop = float(np.polyfit(x[:-1], y[:-1], 1)[0])
    return FitResult(
        law.regime,
        law.coordinates,
        float(slope),
        float(intercept),
        residual,
        law.theory_slope,
        len(usable),
        span,
        drop,
        [[float(a), float(b)] for a, b in zip(x, y)],
    )


def log_law_smoke(records: Sequence[SweepRecord]) -> dict:
    """log log T against decreasing lambda: strictly increasing, with a negative slope."""
    usable = sorted((r for r in records if r.usable), key=lambda r: r.amplitude)
    lam = np.array([r.amplitude for r in usable])
    T = np.array([r.T_est for r in usable])
    if len(usable) < 2 or np.any(T <= math.e):
        return {"lambda": lam.tolist(), "T": T.tolist(), "increasing": False, "slope": None}
    y = np.log(np.log(T))
    slope = float(np.polyfit(np.log(lam), y, 1)[0])
    return {
        "lambda": lam.tolist(),
        "T": T.tolist(),
        "loglogT": y.tolist(),
        "increasing": bool(np.all(np.diff(y) < 0)),  # lambda ascending -> y must fall
        "slope": slope,
    }


# -- blow-up profile ---------------------------------------------------------------------


def blowup_profile(
    record: SweepRecord,
    phi,
    params: ModelParams,
    config: SweepConfig | None = None,
    n_samples: int = 24,
    min_cells: float = 2.0,
    decades: float = 1.0,
) -> dict:
    """Rerun a blow-up record with snapshots over the last resolvable decade of T - t.

    The snapshot stops sit at T_est - tau for tau log-spaced between the
    smallest radius of ``min_cells`` cells and ``decades`` above it.
    """
    if not record.usable:
        raise ValueError("needs a blow-up record")
    cfg = config or SweepConfig()
    grid = Grid(**record.grid)
    mesh = TimeMesh(**record.mesh)
    T = record.T_est
    tau_min = (min_cells * grid.h) ** params.theta
    # start just above the resolution limit so the first sample is not lost to rounding
    taus = np.geomspace(1.01 * tau_min, 1.01 * tau_min * 10.0**decades, n_samples)
    stops = sorted(T - taus[taus < T])
    datum = InitialDatum(closed_form=phi, amplitude=record.amplitude)
    out = march(
        datum, params, mesh, grid, rtol=cfg.rtol, bracket_rtol=cfg.bracket_rtol, box_factor=0.0, snapshot_times=stops
    )
    if not out.blew_up:
        raise RuntimeError("rerun did not blow up")
    # the extra stops perturb the rerun's estimate at bracket level; keep the record's T
    res = blowup_ball_profile(out, params, min_cells=min_cells, decades=decades, T_est=T)
    res["T_est"] = T
    res["rerun_T_est"] = out.T_est
    return res


# -- dichotomy ---------------------------------------------------------------------------


@dataclass
class DichotomyResult:
    profile: str
    horizon: float
    brackets: list  # per grid: {"M", "h", "lo", "hi", "evaluations"}
    drift: list  # relative midpoint shift between consecutive grids
    overlap: list  # bool per consecutive pair
    unresolved: bool

    @property
    def widths(self) -> list:
        return [(b["hi"] - b["lo"]) / (0.5 * (b["hi"] + b["lo"])) for b in self.brackets]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = self.widths
        return d


def _probe_datum(profile: str, gamma: float, params: ModelParams) -> InitialDatum:
    if profile == "singular":
        return InitialDatum(closed_form=Singular(params.theta / (params.p - 1.0), gamma))
    if profile == "critical_log":
        return InitialDatum(closed_form=CriticalLog(gamma, params.theta))
    raise ValueError(f"unknown dichotomy profile {profile!r}")


def dichotomy_probe(
    params: ModelParams,
    profile: str,
    bracket: tuple,
    horizon: float,
    ladder: Sequence[int],
    L: float = 16.0,
    K: int = 256,
    q: float = 2.0,
    rel_width: float = 0.1,
    drift_tol: float = 0.2,
) -> DichotomyResult:
    """Bisect the survive/blow-up threshold in gamma on each grid of ``ladder``.

    A value survives when the solver reaches ``horizon``; blow-up and
    divergence both count as failure to survive.
    """
    if profile == "singular" and params.regime != "supercritical":
        raise ValueError("the singular probe needs p above the Fujita exponent")
    if profile == "critical_log" and params.regime != "critical":
        raise ValueError("the critical-log probe needs p at the Fujita exponent")
    lo0, hi0 = map(float, bracket)
    if not 0 <= lo0 < hi0:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    mesh = TimeMesh(horizon, K, q)

    def survives(gamma: float, grid: Grid) -> bool:
        if gamma == 0.0:
            return True
        out = march(_probe_datum(profile, gamma, params), params, mesh, grid, box_factor=0.0)
        return out.status == "completed"

    results = []
    for i, M in enumerate(sorted(ladder)):
        grid = Grid(params.N, L, M)
        lo, hi = lo0, hi0
        evaluations = []
        if i == 0:
            ok_lo, ok_hi = survives(lo, grid), survives(hi, grid)
            evaluations += [(lo, ok_lo), (hi, ok_hi)]
            if not ok_lo or ok_hi:
                raise ValueError("bracket endpoints must survive (lo) and blow up (hi) on the coarsest grid")
        while hi - lo > rel_width * 0.5 * (hi + lo):
            mid = 0.5 * (lo + hi)
            ok = survives(mid, grid)
            evaluations.append((mid, ok))
            if ok:
                lo = mid
            else:
                hi = mid
        results.append({"M": M, "h": grid.h, "lo": lo, "hi": hi, "evaluations": evaluations})

    drift, overlap = [], []
    for a, b in zip(results, results[1:]):
        ma, mb = 0.5 * (a["lo"] + a["hi"]), 0.5 * (b["lo"] + b["hi"])
        drift.append(abs(mb - ma) / ma)
        overlap.append(bool(max(a["lo"], b["lo"]) <= min(a["hi"], b["hi"])))
    unresolved = any(not o for o in overlap) or any(d > drift_tol for d in drift)
    return DichotomyResult(profile, horizon, results, drift, overlap, unresolved)


# -- output ------------------------------------------------------------------------------


def save_sweep_csv(records: Sequence[SweepRecord], path) -> None:
    def fmt(v):
        return "" if v is None else f"{v:.17g}"

    lines = ["lambda,T_est,bracket_lo,bracket_hi,status,flag"]
    for r in records:
        lo, hi = r.bracket if r.bracket else (None, None)
        lines.append(f"{fmt(r.amplitude)},{fmt(r.T_est)},{fmt(lo)},{fmt(hi)},{r.status},{r.flag}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_plot_data(fit: FitResult, path) -> None:
    """Two columns in the regime's fit coordinates."""
    with open(path, "w") as fh:
        fh.write(f"# {fit.coordinates}\n")
        for x, y in fit.points:
            fh.write(f"{x:.17g} {y:.17g}\n")
