"""Mild solutions of u_t + (-Delta)^{theta/2} u = u^p, u(0) = mu.

Two solvers with different jobs:

* ``march`` advances the Duhamel form with a second-order exponential
  trapezoid step and step-doubling control.  It is the workhorse and detects
  blow-up.
* ``picard_certify`` stores whole trajectories and runs the monotone fixed
  point iteration u_{n+1} = S(t)mu + int_0^t S(t-s) u_n(s)^p ds on a coarse
  mesh, to check that the iterates increase and agree with ``march``.

``supersolution_check`` evaluates F[w] <= 2w for the three candidate
supersolutions built from S(t) at unit horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .criteria import ball_sup_scan, psi_beta, psi_beta_inv
from .grid import Grid
from .kernel import ModelParams
from .semigroup import Field, InitialDatum, apply_semigroup, materialize, semigroup_multiplier

__all__ = [
    "TimeMesh",
    "SolveOutcome",
    "march",
    "picard_certify",
    "supersolution_check",
    "psi_convexity_constant",
    "weissler_bound",
    "blowup_ball_profile",
    "save_norm_history_csv",
]


@dataclass(frozen=True)
class TimeMesh:
    """Graded nodes t_k = T (k/K)^q."""

    T: float
    K: int
    q: float = 1.0

    def __post_init__(self):
        if not self.T > 0 or self.K < 1 or self.q < 1.0:
            raise ValueError("TimeMesh needs T > 0, K >= 1, q >= 1")

    @property
    def times(self) -> np.ndarray:
        return self.T * (np.arange(self.K + 1) / self.K) ** self.q

    def to_dict(self) -> dict:
        return {"T": self.T, "K": self.K, "q": self.q}


@dataclass
class SolveOutcome:
    status: str  # "completed" | "blow_up" | "diverged"
    norm_history: np.ndarray  # rows (t, sup-norm, discrete mass)
    final: Field
    T_est: Optional[float] = None
    bracket: Optional[tuple] = None
    diagnostics: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.status == "blow_up"

    def snapshot_at(self, t: float) -> Field:
        return min(self.snapshots, key=lambda f: abs(f.time - t))


class _Stepper:
    """Exponential trapezoid step for the Duhamel form on a fixed grid."""

    def __init__(self, grid: Grid, theta: float, p: float):
        self.grid = grid
        self.p = p
        self.sym = grid.xi_norm**theta
        self.steps = 0

    def __call__(self, u: np.ndarray, dt: float) -> np.ndarray:
        g, p = self.grid, self.p
        E = np.exp(-dt * self.sym)
        a = g.irfft(E * g.rfft(u))
        b = g.irfft(E * g.rfft(u**p))
        pred = np.maximum(a + dt * b, 0.0)
        self.steps += 1
        return np.maximum(a + 0.5 * dt * (b + pred**p), 0.0)


def _default_threshold(u0: np.ndarray, grid: Grid, theta: float, t1: float) -> float:
    s1 = float(np.max(grid.irfft(grid.rfft(u0) * semigroup_multiplier(grid, t1, theta))))
    return 1e8 * s1 if s1 > 0 else math.inf


def march(
    datum: InitialDatum,
    params: ModelParams,
    mesh: TimeMesh,
    grid: Grid,
    blowup_threshold: float | None = None,
    *,
    rtol: float = 1e-4,
    bracket_rtol: float = 5e-3,
    snapshot_times: Sequence[float] = (),
    keep_growth_snapshots: bool = False,
    growth_factor: float = 1.05,
    box_factor: float = 8.0,
    max_steps: int = 2_000_000,
) -> SolveOutcome:
    """Advance the mild solution over ``mesh`` until the horizon or blow-up.

    Every mesh node is hit exactly; between nodes the step is halved or
    doubled by comparing one full step with two half steps.  Blow-up is
    declared when the sup-norm passes the threshold; the estimate adds the
    time the ODE u' = u^p needs to go from that level to infinity, which is a
    lower bound for the remaining life span.
    """
    theta, p = params.theta, params.p
    if grid.N != params.N:
        raise ValueError("grid dimension does not match params.N")
    if box_factor > 0 and not datum.is_constant and grid.L < box_factor * mesh.T ** (1.0 / theta):
        raise ValueError(
            f"box half-width {grid.L:g} is below {box_factor:g} T^(1/theta) = {box_factor * mesh.T ** (1 / theta):g}"
        )
    u = materialize(datum, grid).values
    t_nodes = mesh.times
    threshold = blowup_threshold if blowup_threshold is not None else _default_threshold(u, grid, theta, t_nodes[1])
    s1 = float(np.max(grid.irfft(grid.rfft(u) * semigroup_multiplier(grid, t_nodes[1], theta))))
    if threshold <= s1:
        raise ValueError("blow-up threshold must exceed ||S(t_1) mu||_inf")

    stops = np.unique(np.concatenate([t_nodes, [s for s in snapshot_times if 0 <= s <= mesh.T]]))
    snap_set = set(float(s) for s in snapshot_times)
    step = _Stepper(grid, theta, p)

    history = [(0.0, float(u.max()), grid.integrate(u))]
    snapshots: list[Field] = []
    if 0.0 in snap_set or keep_growth_snapshots:
        snapshots.append(Field(grid, 0.0, u.copy()))
    last_kept = float(u.max())
    t = 0.0
    dt = stops[1] - stops[0]
    rejected = 0
    status = "completed"
    T_est = bracket = None
    reason = ""

    for target in stops[1:]:
        while t < target * (1 - 1e-15):
            if step.steps > max_steps:
                status, reason = "diverged", "step budget exhausted"
                break
            h = min(dt, target - t)
            with np.errstate(over="ignore", invalid="ignore"):
                full = step(u, h)
                half = step(step(u, 0.5 * h), 0.5 * h)
            top = float(half.max())
            if not (np.isfinite(top) and np.all(np.isfinite(full))):
                dt = 0.25 * h
                rejected += 1
                if dt < 1e-14 * max(t, mesh.T):
                    status, reason = "diverged", "non-finite values"
                    break
                continue
            err = float(np.max(np.abs(full - half))) / top if top > 0 else 0.0
            if err > rtol:
                dt = h * max(0.2, 0.9 * (rtol / err) ** (1.0 / 3.0))
                rejected += 1
                growth_time = 1.0 / ((p - 1.0) * max(float(u.max()), 1e-300) ** (p - 1.0))
                if dt < 1e-12 * growth_time:
                    status, reason = "diverged", "step size collapsed"
                    break
                continue
            t_prev, u_prev = t, u
            u, t = half, t + h
            history.append((t, top, grid.integrate(u)))
            if keep_growth_snapshots and top >= growth_factor * last_kept:
                snapshots.append(Field(grid, t, u.copy()))
                last_kept = top
            dt = h * min(2.0, 0.9 * (rtol / err) ** (1.0 / 3.0)) if err > 0 else 2.0 * h
            if top > threshold:
                status = "blow_up"
                remaining = top ** (1.0 - p) / (p - 1.0)
                T_est = t + remaining
                bracket = (t_prev, T_est)
                # tighten by re-stepping the last interval with smaller steps
                cap = h
                while (bracket[1] - bracket[0]) > bracket_rtol * T_est and cap > 1e-14 * T_est:
                    cap *= 0.5
                    uu, tt = u_prev, t_prev
                    while True:
                        with np.errstate(over="ignore", invalid="ignore"):
                            nxt = step(uu, cap)
                        if not np.isfinite(nxt.max()) or nxt.max() > threshold:
                            break
                        uu, tt = nxt, tt + cap
                    top2 = float(nxt.max()) if np.isfinite(nxt.max()) else threshold
                    T_est = tt + cap + top2 ** (1.0 - p) / (p - 1.0)
                    bracket = (tt, T_est)
                break
        if status != "completed":
            break
        if float(target) in snap_set:
            if not snapshots or snapshots[-1].time != t:
                snapshots.append(Field(grid, t, u.copy()))

    hist = np.array(history)
    diagnostics = {
        "steps": step.steps,
        "rejected": rejected,
        "threshold": threshold,
        "reason": reason,
        "max_norm": float(hist[:, 1].max()),
    }
    if bracket is not None:
        T_est, bracket = float(T_est), (float(bracket[0]), float(bracket[1]))
    return SolveOutcome(status, hist, Field(grid, t, u), T_est, bracket, diagnostics, snapshots)


def save_norm_history_csv(outcome: SolveOutcome, path) -> None:
    lines = ["t,sup_norm,mass"] + [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in outcome.norm_history]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# -- monotone iteration ------------------------------------------------------------


def picard_certify(
    datum: InitialDatum,
    params: ModelParams,
    mesh: TimeMesh,
    grid: Grid,
    sweeps: int,
    compare_march: bool = True,
) -> dict:
    """Full-trajectory monotone iteration on a coarse mesh.

    Returns the largest monotonicity defect max(0, u_n - u_{n+1}) over all
    sweeps, nodes and times, the sup-norm scale of the last iterate, and the
    sup distance from ``march`` at the mesh nodes.
    """
    if sweeps < 2:
        raise ValueError("need at least two sweeps")
    theta, p = params.theta, params.p
    times = mesh.times
    mu = materialize(datum, grid).values
    sym = grid.xi_norm**theta
    mu_hat = grid.rfft(mu)
    linear = np.stack([mu] + [np.maximum(grid.irfft(mu_hat * np.exp(-t * sym)), 0.0) for t in times[1:]])

    u = linear.copy()
    defect = 0.0
    overflow = False
    history = [float(u.max())]
    for _ in range(sweeps - 1):
        with np.errstate(over="raise", invalid="raise"):
            try:
                f = u**p
                duh = np.zeros_like(u)
                for k in range(1, times.size):
                    dk = times[k] - times[k - 1]
                    carry = grid.irfft(grid.rfft(duh[k - 1] + 0.5 * dk * f[k - 1]) * np.exp(-dk * sym))
                    duh[k] = np.maximum(carry, 0.0) + 0.5 * dk * f[k]
                new = linear + duh
            except FloatingPointError:
                overflow = True
                break
        if not np.all(np.isfinite(new)):
            overflow = True
            break
        defect = max(defect, float(np.max(u - new)))
        u = new
        history.append(float(u.max()))

    scale = float(u.max())
    report = {
        "sweeps": len(history),
        "overflow": overflow,
        "defect": max(defect, 0.0),
        "scale": scale,
        "relative_defect": max(defect, 0.0) / scale if scale > 0 else 0.0,
        "sup_history": history,
        "iterate": u,
        "times": times,
    }
    if compare_march and not overflow:
        run = march(datum, params, mesh, grid, snapshot_times=times, box_factor=0.0)
        dist = 0.0
        for snap in run.snapshots:
            k = int(np.argmin(np.abs(times - snap.time)))
            dist = max(dist, float(np.max(np.abs(snap.values - u[k]))))
        report["march_status"] = run.status
        report["march_distance"] = dist
        report["march_relative_distance"] = dist / scale if scale > 0 else 0.0
    return report


# -- supersolution certificates --------------------------------------------------------


def psi_convexity_constant(beta: float, p: float) -> float:
    """Smallest L >= e (on a 1% ladder) with psi_{beta,L} convex and the
    ratios s^p/psi and psi/s increasing on (0, infinity)."""
    s = np.geomspace(1e-12, 1e12, 2401)
    L = math.e
    for _ in range(5000):
        g = np.log(L + s)
        convex = g * (2.0 * L + s) + s * (beta - 1.0) > 0.0
        ratio_up = (p - 1.0) * g * (L + s) - beta * s > 0.0
        if np.all(convex) and np.all(ratio_up):
            return L
        L *= 1.01
    raise ValueError(f"no admissible L found for beta={beta}, p={p}")


def supersolution_check(
    construction: str,
    datum: InitialDatum,
    params: ModelParams,
    grid: Grid,
    alpha: float | None = None,
    beta: float | None = None,
    sample_times: Sequence[float] = (0.125, 0.25, 0.5, 0.75, 0.9, 0.99),
    n_quad: int = 24,
) -> dict:
    """min over samples of 2w - F[w] with F[w](t) = S(t)mu + int_0^t S(t-s)(2w(s))^p ds.

    Time is normalised to the unit horizon.  ``construction`` selects
    w = S(t)mu ("scaled_semigroup"), [S(t)mu^alpha]^{1/alpha} ("alpha_mean")
    or psi_{beta,L}^{-1}[S(t) psi_{beta,L}(mu)] ("psi_transform").
    """
    theta, p = params.theta, params.p
    sym = grid.xi_norm**theta
    L_psi = None

    def S(values_hat, t):
        return np.maximum(grid.irfft(values_hat * np.exp(-t * sym)), 0.0)

    mu_hat = grid.rfft(materialize(datum, grid).values)
    if construction == "scaled_semigroup":
        base_hat = mu_hat

        def w_of(t):
            return S(base_hat, t)

    elif construction == "alpha_mean":
        if alpha is None or not 1.0 < alpha < p:
            raise ValueError("alpha_mean needs 1 < alpha < p")
        base_hat = grid.rfft(materialize(datum, grid, transform=alpha).values)

        def w_of(t):
            return S(base_hat, t) ** (1.0 / alpha)

    elif construction == "psi_transform":
        if beta is None or beta <= 0:
            raise ValueError("psi_transform needs beta > 0")
        L_psi = psi_convexity_constant(beta, p)
        base_hat = grid.rfft(materialize(datum, grid, transform=lambda v: psi_beta(v, beta, L_psi)).values)

        def w_of(t):
            try:
                return psi_beta_inv(S(base_hat, t), beta, L_psi)
            except ValueError as exc:  # pragma: no cover - S(t) output is clamped
                raise ValueError(f"psi inverse failed: {exc}") from exc

    else:
        raise ValueError(f"unknown construction {construction!r}")

    x, wq = np.polynomial.legendre.leggauss(n_quad)
    v = 0.5 * (x + 1.0)
    per_sample = []
    abs_margin = math.inf
    rel_margin = math.inf
    for t in sample_times:
        if not 0.0 < t < 1.0:
            raise ValueError("sample times must lie in (0, 1)")
        # s = t v^2 clusters nodes near s = 0 where w may be singular
        s_nodes = t * v * v
        jac = 0.5 * wq * 2.0 * t * v
        duhamel_hat = np.zeros_like(mu_hat)
        for s, c in zip(s_nodes, jac):
            duhamel_hat += c * grid.rfft((2.0 * w_of(s)) ** p) * np.exp(-(t - s) * sym)
        F = S(mu_hat, t) + np.maximum(grid.irfft(duhamel_hat), 0.0)
        w = w_of(t)
        gap = 2.0 * w - F
        m = float(gap.min())
        pos = w > 1e-300
        r = float(np.min(gap[pos] / w[pos])) if np.any(pos) else 0.0
        per_sample.append({"t": t, "margin": m, "relative_margin": r})
        abs_margin = min(abs_margin, m)
        rel_margin = min(rel_margin, r)
    return {
        "construction": construction,
        "margin": abs_margin,
        "relative_margin": rel_margin,
        "holds": bool(abs_margin >= 0.0),
        "samples": per_sample,
        "L": L_psi,
    }


# -- a-priori bounds measured on computed solutions -------------------------------------


def weissler_bound(
    history: Sequence[Field],
    params: ModelParams,
    tau_list: Sequence[float],
    t_list: Sequence[float],
    horizon: float | None = None,
) -> dict:
    """max over samples of t^{1/(p-1)} ||S(t) u(tau)||_inf, per tau and overall."""
    p, theta = params.p, params.theta
    per_tau = {}
    for tau in tau_list:
        snap = min(history, key=lambda f: abs(f.time - tau))
        best = 0.0
        for t in t_list:
            if horizon is not None and t + snap.time >= horizon:
                continue
            val = apply_semigroup(snap, t, theta).sup * t ** (1.0 / (p - 1.0))
            best = max(best, val)
        per_tau[float(snap.time)] = best
    vals = [v for v in per_tau.values() if v > 0]
    spread = max(vals) / min(vals) if vals else 1.0
    return {"kappa": max(per_tau.values(), default=0.0), "per_tau": per_tau, "spread": spread}


def blowup_ball_profile(
    outcome: SolveOutcome,
    params: ModelParams,
    min_cells: float = 2.0,
    decades: float = 1.0,
    T_est: float | None = None,
) -> dict:
    """(T-t)^{1/(p-1)} sup_x avg_{B(x,(T-t)^{1/theta})} u(., t) near blow-up.

    Uses the snapshots of a blow-up run.  The window is the last ``decades``
    of T - t whose ball radius still spans ``min_cells`` cells.  ``T_est``
    overrides the run's own estimate (e.g. with that of an earlier identical run).
    """
    if not outcome.blew_up:
        raise ValueError("needs a blow-up run")
    T, p, theta = (T_est or outcome.T_est), params.p, params.theta
    grid = outcome.final.grid
    taus, vals = [], []
    for snap in outcome.snapshots:
        tau = T - snap.time
        if tau <= 0:
            continue
        r = tau ** (1.0 / theta)
        if r < min_cells * grid.h or r > grid.L:
            continue
        avg = ball_sup_scan(snap, [r], grid).averages[0]
        taus.append(tau)
        vals.append(avg * tau ** (1.0 / (p - 1.0)))
    taus, vals = np.array(taus), np.array(vals)
    if taus.size == 0:
        return {"tau": taus, "value": vals, "window": None, "spread": math.nan}
    lo = taus.min()
    sel = taus <= lo * 10.0**decades * (1 + 1e-3)
    window = vals[sel]
    return {
        "tau": taus,
        "value": vals,
        "window": (float(lo), float(lo * 10.0**decades)),
        "window_tau_span": float(taus[sel].max() / lo),
        "spread": float(window.max() / window.min()),
        "max": float(window.max()),
        "min": float(window.min()),
    }
