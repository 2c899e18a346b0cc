"""Ball-supremum functionals and the necessary / sufficient conditions on data.

Every condition on the initial measure is phrased through

    sup_x mu(B(x, sigma))      or      sup_x [avg_{B(x, sigma)} mu^alpha]^{1/alpha},

so a ``BallScan`` over a list of radii is the only thing the verdicts need.
Verdicts never pass or fail against the unknown theoretical constants; they
report the smallest constant that makes the inequality true over the scanned
radii, and only compare against a threshold when one is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Grid
from .kernel import ModelParams
from .semigroup import Field, InitialDatum, materialize

__all__ = [
    "BallScan",
    "CriterionVerdict",
    "ball_sup_scan",
    "check_necessary",
    "check_sufficient",
    "psi_beta",
    "psi_beta_inv",
    "rho",
    "initial_trace_pairing",
    "save_scan_csv",
]


@dataclass
class BallScan:
    sigma: np.ndarray
    sup_values: np.ndarray  # sup_x of the ball integral of mu^alpha (mass units)
    averages: np.ndarray  # sup_x [ball average of mu^alpha]^{1/alpha}
    alpha: Optional[float] = 1.0
    below_resolution: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    grid: Optional[Grid] = None

    def __len__(self):
        return self.sigma.size


@dataclass
class CriterionVerdict:
    criterion: str
    measured: float
    sigma_range: tuple
    threshold: Optional[float] = None
    passed: Optional[bool] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "measured": self.measured,
            "sigma_range": list(self.sigma_range),
            "threshold": self.threshold,
            "passed": self.passed,
            **self.detail,
        }


def _ball_stencil(grid: Grid, sigma: float) -> np.ndarray:
    return (grid.periodic_radius < sigma).astype(float)


def ball_sup_scan(
    datum,
    sigma_grid: Sequence[float],
    grid: Grid,
    alpha: float = 1.0,
    transform: Optional[Callable] = None,
) -> BallScan:
    """Scan sup_x over grid nodes of ball integrals of mu^alpha (or transform(mu)).

    ``datum`` is an InitialDatum or a Field (read as a density).  The ball
    indicator is sampled at nodes; singular cells and atoms enter with their
    exact cell mass through ``materialize``.
    """
    sigma = np.sort(np.asarray(sigma_grid, dtype=float))
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    if np.any(sigma > grid.L):
        raise ValueError("ball radii must not exceed the box half-width")
    power = None if (alpha == 1.0 and transform is None) else (transform or alpha)

    if isinstance(datum, Field):
        v = datum.values
        if power is not None:
            v = power(v) if callable(power) else v**power
    else:
        v = materialize(datum, grid, transform=power).values

    vhat = grid.rfft(v)
    masses = np.empty(sigma.size)
    avgs = np.empty(sigma.size)
    for i, s in enumerate(sigma):
        stencil = _ball_stencil(grid, s)
        count = stencil.sum()
        if count == 0:
            # radius below half a cell: only the centre cell would count
            stencil = np.zeros(grid.shape)
            stencil[(0,) * grid.N] = 1.0
            count = 1.0
        conv = grid.irfft(vhat * grid.rfft(stencil)) * grid.cell_volume
        best = float(conv.max())
        masses[i] = best
        avgs[i] = best / (count * grid.cell_volume)
    # FFT round-off must not break the nesting of balls
    masses = np.maximum.accumulate(np.maximum(masses, 0.0))
    avgs = np.maximum(avgs, 0.0)
    if transform is None and alpha != 1.0:
        avgs = avgs ** (1.0 / alpha)
    return BallScan(
        sigma=sigma,
        sup_values=masses,
        averages=avgs,
        alpha=None if transform is not None else alpha,
        below_resolution=sigma < grid.h,
        grid=grid,
    )


# -- logarithmic functionals -----------------------------------------------------


def psi_beta(s, beta: float, L: float = math.e):
    """s [log(L + s)]^beta."""
    s = np.asarray(s, dtype=float)
    return s * np.log(L + s) ** beta


def psi_beta_inv(y, beta: float, L: float = math.e, rtol: float = 1e-13):
    """Inverse of psi_beta by bisection in log space."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("psi_beta_inv needs y >= 0")
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.zeros_like(y)
    pos = y > 0
    yy = y[pos]
    # psi(s) >= s log(L)^beta and psi(s) <= s log(L + y)^beta on s <= y
    lo = np.log(yy / np.log(L + yy) ** beta)
    hi = np.log(yy / math.log(L) ** beta)
    target = np.log(yy)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = mid + beta * np.log(np.log(L + np.exp(mid)))
        below = val < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < rtol):
            break
    out[pos] = np.exp(0.5 * (lo + hi))
    return out[0] if scalar else out


def rho(s, N: int, theta: float):
    """s^{-N} [log(e + 1/s)]^{-N/theta}."""
    s = np.asarray(s, dtype=float)
    return s ** (-N) * np.log(np.e + 1.0 / s) ** (-N / theta)


# -- verdicts ----------------------------------------------------------------------


def _in_range(scan: BallScan, T: float, theta: float):
    top = T ** (1.0 / theta)
    sel = scan.sigma <= top * (1 + 1e-12)
    if not np.any(sel):
        raise ValueError("scan has no radius below T^{1/theta}")
    return sel, top


def _at_radius(scan: BallScan, radius: float) -> int:
    i = int(np.argmin(np.abs(scan.sigma - radius)))
    if abs(scan.sigma[i] - radius) > 1e-9 * radius:
        raise ValueError(f"scan does not contain the radius T^(1/theta) = {radius:g}")
    return i


def _verdict(name, values, sigma, threshold, **detail):
    measured = float(np.max(values)) if values.size else 0.0
    passed = None if threshold is None else bool(measured <= threshold)
    return CriterionVerdict(name, measured, (float(sigma.min()), float(sigma.max())), threshold, passed, detail)


def check_necessary(scan: BallScan, params: ModelParams, T: float, threshold: float | None = None) -> CriterionVerdict:
    """Smallest constant in the regime's necessary condition for existence on [0, T).

    A measured value is a lower bound for the theoretical constant whenever a
    solution on [0, T) is known to exist; nothing is claimed otherwise.
    """
    if scan.alpha != 1.0:
        raise ValueError("necessary conditions use raw ball masses (alpha = 1)")
    N, theta, p = params.N, params.theta, params.p
    regime = params.regime
    if regime == "subcritical":
        top = T ** (1.0 / theta)
        i = _at_radius(scan, top)
        val = scan.sup_values[i] / T ** (N / theta - 1.0 / (p - 1.0))
        return _verdict("necessary_1", np.array([val]), scan.sigma[i : i + 1], threshold, regime=regime)
    sel, top = _in_range(scan, T, theta)
    sig, mass = scan.sigma[sel], scan.sup_values[sel]
    if regime == "critical":
        bound = np.log(np.e + top / sig) ** (-N / theta)
        return _verdict("necessary_2", mass / bound, sig, threshold, regime=regime)
    bound = sig ** (N - theta / (p - 1.0))
    return _verdict("necessary_3", mass / bound, sig, threshold, regime=regime)


def check_sufficient(
    source,
    params: ModelParams,
    T: float,
    variant: str,
    alpha: float | None = None,
    beta: float | None = None,
    grid: Grid | None = None,
    sigma_grid: Sequence[float] | None = None,
    threshold: float | None = None,
) -> CriterionVerdict:
    """Smallest constant in one of the sufficient conditions.

    ``variant`` is "1_9" (ball mass at the radius T^{1/theta}, p < p_crit),
    "1_10" (alpha-means, 1 < alpha < p) or "1_12" (log-refined means at
    p = p_crit, beta > 0).  ``source`` is a BallScan for 1_9/1_10 or an
    InitialDatum (with ``grid`` and ``sigma_grid``) for any variant.
    """
    N, theta, p = params.N, params.theta, params.p
    regime = params.regime
    top = T ** (1.0 / theta)

    if variant == "1_9":
        if regime != "subcritical":
            raise ValueError("variant 1_9 requires p < p_crit")
        scan = source if isinstance(source, BallScan) else ball_sup_scan(source, [top], grid)
        i = _at_radius(scan, top)
        val = scan.sup_values[i] / T ** (N / theta - 1.0 / (p - 1.0))
        return _verdict("sufficient_1_9", np.array([val]), scan.sigma[i : i + 1], threshold)

    if variant == "1_10":
        if alpha is None or not 1.0 < alpha < p:
            raise ValueError("variant 1_10 requires 1 < alpha < p")
        if isinstance(source, BallScan):
            scan = source
            if scan.alpha != alpha:
                raise ValueError("scan was taken with a different alpha")
        else:
            scan = ball_sup_scan(source, sigma_grid, grid, alpha=alpha)
        sel, _ = _in_range(scan, T, theta)
        sig = scan.sigma[sel]
        vals = scan.averages[sel] / sig ** (-theta / (p - 1.0))
        return _verdict("sufficient_1_10", vals, sig, threshold, alpha=alpha)

    if variant == "1_12":
        if regime != "critical":
            raise ValueError("variant 1_12 requires p = p_crit")
        if beta is None or beta <= 0:
            raise ValueError("variant 1_12 requires beta > 0")
        if not isinstance(source, (InitialDatum, Field)):
            raise ValueError("variant 1_12 needs the datum itself, not a scan")
        scale = T ** (1.0 / (p - 1.0))
        scan = ball_sup_scan(source, sigma_grid, grid, transform=lambda v: psi_beta(scale * v, beta))
        sel, _ = _in_range(scan, T, theta)
        sig = scan.sigma[sel]
        lhs = psi_beta_inv(scan.averages[sel], beta)
        vals = lhs / rho(sig / top, N, theta)
        return _verdict("sufficient_1_12", vals, sig, threshold, beta=beta)

    raise ValueError(f"unknown variant {variant!r}")


# -- initial trace -------------------------------------------------------------------


def initial_trace_pairing(history, test_function: Callable, t_list: Sequence[float] | None = None) -> dict:
    """Pairings int u(., t) eta dx and their Richardson limit as t -> 0.

    ``history`` is a sequence of Fields (or (t, Field) pairs).  When
    ``t_list`` is given the snapshots closest to those times are used; the
    extrapolation uses the three smallest times, which must be in ratio 1:2:4.
    """
    snaps = [s if isinstance(s, Field) else s[1] for s in history]
    if t_list is not None:
        chosen = []
        for t in t_list:
            chosen.append(min(snaps, key=lambda f: abs(f.time - t)))
        snaps = chosen
    snaps = sorted(snaps, key=lambda f: f.time)
    times = np.array([f.time for f in snaps])
    pair = np.array([f.grid.integrate(f.values * test_function(*f.grid.coords)) for f in snaps])
    result = {"times": times.tolist(), "pairings": pair.tolist()}
    if len(snaps) < 3:
        result.update(limit=float(pair[0]), order=None, converged=False)
        return result
    p1, p2, p4 = pair[:3]
    if not np.allclose(times[1:3] / times[0], [2.0, 4.0], rtol=1e-6):
        raise ValueError("Richardson extrapolation needs times in ratio 1:2:4")
    d1, d2 = p2 - p1, p4 - p2
    scale = max(abs(p1), 1e-300)
    if abs(d1) <= 1e-14 * scale:
        result.update(limit=float(p1), order=None, converged=True)
        return result
    ratio = d2 / d1
    converged = bool(ratio > 1.0 + 1e-6)
    order = math.log2(ratio) if converged else 1.0
    limit = p1 - d1 / (2.0**order - 1.0)
    result.update(limit=float(limit), order=order, converged=converged)
    return result


def save_scan_csv(scan: BallScan, path) -> None:
    lines = ["sigma,sup_mass,average"]
    lines += [f"{s:.17g},{m:.17g},{a:.17g}" for s, m, a in zip(scan.sigma, scan.sup_values, scan.averages)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
