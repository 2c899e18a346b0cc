"""Fundamental solution of u_t + (-Delta)^{theta/2} u = 0.

G(., 1) is tabulated once per (theta, N) on a geometric radial grid and every
other evaluation goes through the self-similar rescaling

    G(x, t) = t^{-N/theta} G(t^{-1/theta} x, 1).

theta = 2 is the Gaussian and theta = 1 the Poisson kernel; both have closed
forms.  Other orders are obtained by inverting the Fourier transform
exp(-|xi|^theta) with a panelled Gauss-Legendre quadrature, switching to the
large-|x| expansion of the same integral once that expansion has converged to
round-off.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, interpolate, signal, special

from .grid import Grid

__all__ = [
    "ModelParams",
    "KernelProfile",
    "KernelBuildError",
    "GridSpec",
    "build_profile",
    "eval_kernel",
    "fourier_inversion",
    "closed_form_kernel",
    "tail_series_coefficients",
    "subordinator_density",
    "subordination_kernel",
    "check_semigroup_identity",
    "save_profile",
    "load_profile",
]


class KernelBuildError(RuntimeError):
    """Raised when a kernel table fails one of its certification checks."""


@dataclass(frozen=True)
class ModelParams:
    """The problem triple (N, theta, p)."""

    N: int
    theta: float
    p: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 < self.theta <= 2.0:
            raise ValueError(f"theta must lie in (0, 2], got {self.theta!r}")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p!r}")

    @property
    def p_crit(self) -> float:
        """Fujita exponent 1 + theta/N."""
        return 1.0 + self.theta / self.N

    @property
    def regime(self) -> str:
        # exact comparison is intended: the critical case is only ever set by hand
        if math.isclose(self.p, self.p_crit, rel_tol=1e-12, abs_tol=0.0):
            return "critical"
        return "subcritical" if self.p < self.p_crit else "supercritical"

    @property
    def self_similar_exponent(self) -> float:
        """theta/(p-1): decay rate of the scale-invariant singular profile."""
        return self.theta / (self.p - 1.0)

    def to_dict(self) -> dict:
        return {"N": self.N, "theta": self.theta, "p": self.p}


@dataclass(frozen=True)
class GridSpec:
    r_min: float = 1e-3
    r_max: float = 1e3
    nodes: int = 4096
    mass_tol: float = 1e-6


# -- closed forms -----------------------------------------------------------


def closed_form_kernel(r, t, theta: float, N: int):
    """Gaussian (theta=2) or Poisson (theta=1) kernel at radius r, time t."""
    r = np.asarray(r, dtype=float)
    if theta == 2.0:
        return (4.0 * np.pi * t) ** (-N / 2.0) * np.exp(-(r * r) / (4.0 * t))
    if theta == 1.0:
        c = special.gamma((N + 1) / 2.0) / np.pi ** ((N + 1) / 2.0)
        return c * t / (t * t + r * r) ** ((N + 1) / 2.0)
    raise ValueError(f"no closed form for theta={theta}")


# -- large-radius expansion ---------------------------------------------------


def tail_series_coefficients(theta: float, N: int, K: int = 64) -> np.ndarray:
    """Coefficients a_k with G(r,1) ~ sum_k a_k r^{-N-k theta} as r -> infinity.

    Convergent for theta < 1, asymptotic for 1 <= theta < 2; all terms vanish
    at theta = 2.
    """
    k = np.arange(1, K + 1, dtype=float)
    logmag = (
        special.gammaln(1.0 + k * theta / 2.0)
        + special.gammaln((N + k * theta) / 2.0)
        - special.gammaln(k + 1.0)
        + k * theta * math.log(2.0)
        - (N / 2.0 + 1.0) * math.log(math.pi)
    )
    sines = np.sin(k * np.pi * theta / 2.0)
    sines[np.abs(sines) < 1e-12] = 0.0
    return (-1.0) ** (k + 1) * sines * np.exp(logmag)


def _series_value(r: float, t: float, theta: float, N: int, coeffs: np.ndarray):
    """Truncated expansion at (r, t) with an error estimate, or None if unusable."""
    k = np.arange(1, coeffs.size + 1, dtype=float)
    nz = coeffs != 0.0
    k, coeffs = k[nz], coeffs[nz]
    logterm = np.log(np.abs(coeffs)) + k * math.log(t) - (N + k * theta) * math.log(r)
    if logterm.max() > 700.0:
        return None
    terms = np.sign(coeffs) * np.exp(logterm)
    mags = np.abs(terms)
    if theta < 1.0:
        cut = coeffs.size
        err = mags[-1] + mags[-2]
    else:
        # asymptotic: stop before the smallest term
        cut = int(np.argmin(mags))
        err = mags[cut]
    value = float(np.sum(terms[:cut]))
    if not np.isfinite(value) or value <= 0.0:
        return None
    if err > 1e-14 * value or np.sum(mags[:cut]) > 1e3 * value:
        return None
    return value


# -- Fourier inversion ----------------------------------------------------------

_GL16 = np.polynomial.legendre.leggauss(16)
_GL24 = np.polynomial.legendre.leggauss(24)


def _radial_weight(r: float, xi: np.ndarray, N: int) -> np.ndarray:
    """Integrand weight so that G(r) = int_0^inf weight(xi) exp(-t xi^theta) dxi."""
    if N == 1:
        return np.cos(r * xi) / np.pi
    if r == 0.0:
        return xi ** (N - 1) * 2.0 ** (1 - N) / (np.pi ** (N / 2.0) * special.gamma(N / 2.0))
    nu = N / 2.0 - 1.0
    return (2.0 * np.pi) ** (-N / 2.0) * r ** (-nu) * special.jv(nu, r * xi) * xi ** (N / 2.0)


def _panel_breaks(r: float, xi_max: float, smooth_origin: bool) -> np.ndarray:
    # panels resolve both the oscillation (pi/r) and the decay, which varies on
    # the scale of xi itself once xi is large
    osc = np.pi / r if r > 0 else np.inf
    first = min(osc, 0.25, xi_max / 16.0)
    breaks = [0.0, first]
    while breaks[-1] < xi_max:
        x = breaks[-1]
        breaks.append(x + min(osc, max(first, 0.15 * x)))
    breaks = np.asarray(breaks)
    if smooth_origin:
        return breaks
    # xi^theta is not smooth at 0: refine geometrically towards the origin
    geo = first * 2.0 ** -np.arange(1, 60, dtype=float)
    return np.concatenate([[0.0], geo[::-1], breaks[1:]])


def _panel_quadrature(r, t, theta, N, nodes):
    xi_max = (45.0 / t) ** (1.0 / theta)
    breaks = _panel_breaks(r, xi_max, smooth_origin=float(theta).is_integer())
    x, w = nodes
    a, b = breaks[:-1, None], breaks[1:, None]
    xi = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    f = _radial_weight(r, xi, N) * np.exp(-t * xi**theta)
    return float(np.sum(0.5 * (b - a) * w[None, :] * f))


def fourier_inversion(r, t: float, theta: float, N: int, series: bool = True):
    """G(r, t) by inverting exp(-t|xi|^theta); returns (values, max error estimate).

    The error estimate compares two Gauss-Legendre orders on the same panels.
    With ``series=True`` radii where the large-|x| expansion has converged to
    round-off use it instead of the oscillatory quadrature.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    coeffs = tail_series_coefficients(theta, N) if theta < 2.0 else None
    out = np.empty_like(r)
    err = 0.0
    for i, ri in enumerate(r):
        if series and coeffs is not None and ri > 0.0:
            v = _series_value(ri, t, theta, N, coeffs)
            if v is not None:
                out[i] = v
                continue
        hi = _panel_quadrature(ri, t, theta, N, _GL24)
        lo = _panel_quadrature(ri, t, theta, N, _GL16)
        out[i] = hi
        err = max(err, abs(hi - lo))
    return out, err


# -- tabulated profile ---------------------------------------------------------


@dataclass(frozen=True)
class KernelProfile:
    """Radial table of G(., 1) plus its power tail beyond the last node."""

    theta: float
    N: int
    radial_grid: np.ndarray
    values: np.ndarray
    tail_coeff: float
    tail_correction: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass: float = 1.0
    quad_error: float = 0.0
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.theta != 2.0:
            spline = interpolate.CubicSpline(np.log(self.radial_grid[1:]), np.log(self.values[1:]))
            object.__setattr__(self, "_spline", spline)

    @property
    def is_gaussian(self) -> bool:
        return self.theta == 2.0

    @property
    def r_max(self) -> float:
        return float(self.radial_grid[-1])

    def tail(self, r):
        """Power tail c r^{-N-theta} plus the known higher-order corrections."""
        r = np.asarray(r, dtype=float)
        out = self.tail_coeff * r ** (-self.N - self.theta)
        for k, a in enumerate(self.tail_correction, start=2):
            out = out + a * r ** (-self.N - k * self.theta)
        return out

    def radial(self, r):
        """G(r, 1) for r >= 0."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.is_gaussian:
            return closed_form_kernel(r, 1.0, 2.0, self.N)
        out = np.empty_like(r)
        r1, g0, g1 = self.radial_grid[1], self.values[0], self.values[1]
        core = r < r1
        mid = (~core) & (r <= self.r_max)
        far = r > self.r_max
        out[core] = g0 + (g1 - g0) * (r[core] / r1) ** 2
        out[mid] = np.exp(self._spline(np.log(r[mid])))
        out[far] = self.tail(r[far])
        return out

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "N": self.N,
            "radial_grid": self.radial_grid.tolist(),
            "values": self.values.tolist(),
            "tail_coeff": self.tail_coeff,
            "tail_correction": self.tail_correction.tolist(),
            "mass": self.mass,
            "quad_error": self.quad_error,
            "tolerances": self.tolerances,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelProfile":
        return cls(
            theta=float(d["theta"]),
            N=int(d["N"]),
            radial_grid=np.asarray(d["radial_grid"], dtype=float),
            values=np.asarray(d["values"], dtype=float),
            tail_coeff=float(d["tail_coeff"]),
            tail_correction=np.asarray(d.get("tail_correction", []), dtype=float),
            mass=float(d.get("mass", 1.0)),
            quad_error=float(d.get("quad_error", 0.0)),
            tolerances=dict(d.get("tolerances", {})),
        )


def _unit_sphere_area(N: int) -> float:
    return 2.0 * math.pi ** (N / 2.0) / special.gamma(N / 2.0)


def _profile_mass(radial_grid, values, tail_coeff, tail_correction, theta, N) -> float:
    """Integral of the reconstructed G(., 1) over R^N."""
    r, g = radial_grid, values
    area = _unit_sphere_area(N)
    # core [0, r1]: g0 + (g1-g0)(r/r1)^2 against r^{N-1}
    r1 = r[1]
    core = area * (g[0] * r1**N / N + (g[1] - g[0]) * r1**N / (N + 2))
    # body in log-radius: int g r^N dlog r
    lr = np.log(r[1:])
    body = area * integrate.simpson(g[1:] * r[1:] ** N, x=lr)
    tail = 0.0
    rm = r[-1]
    coeffs = [tail_coeff, *tail_correction]
    for k, a in enumerate(coeffs, start=1):
        tail += area * a * rm ** (-k * theta) / (k * theta)
    return float(core + body + tail)


def build_profile(theta: float, N: int = 1, grid_spec: GridSpec | None = None) -> KernelProfile:
    """Tabulate G(., 1) and certify positivity, monotonicity and unit mass."""
    if not 0.0 < theta <= 2.0:
        raise ValueError(f"theta must lie in (0, 2], got {theta}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    spec = grid_spec or GridSpec()
    radii = np.concatenate([[0.0], np.geomspace(spec.r_min, spec.r_max, spec.nodes)])
    tolerances = {"mass_tol": spec.mass_tol, "r_min": spec.r_min, "r_max": spec.r_max, "nodes": spec.nodes}

    if theta == 2.0:
        values = closed_form_kernel(radii, 1.0, 2.0, N)
        return KernelProfile(theta, N, radii, values, 0.0, mass=1.0, tolerances=tolerances)

    quad_error = 0.0
    if theta == 1.0:
        values = closed_form_kernel(radii, 1.0, 1.0, N)
    else:
        values, quad_error = fourier_inversion(radii, 1.0, theta, N)
        if quad_error > 1e-10:
            raise KernelBuildError(f"Fourier quadrature did not converge: error estimate {quad_error:.3e}")

    if np.any(values <= 0.0):
        raise KernelBuildError("kernel table has non-positive entries")
    if np.any(np.diff(values) > 0.0):
        raise KernelBuildError("kernel table is not radially non-increasing")

    coeffs = tail_series_coefficients(theta, N, K=12)
    # keep higher-order terms only while the nonzero ones decrease at r_max
    mags = np.abs(coeffs) * spec.r_max ** (-np.arange(1, coeffs.size + 1) * theta)
    keep, last_mag = 1, mags[0]
    while keep < coeffs.size and mags[keep] < last_mag and mags[keep] > 1e-30 * mags[0] or (
        keep < coeffs.size and mags[keep] == 0.0
    ):
        last_mag = mags[keep] or last_mag
        keep += 1
    correction = coeffs[1:keep]

    last = radii >= spec.r_max / 10.0
    rr = radii[last]
    resid = values[last] - sum(a * rr ** (-N - k * theta) for k, a in enumerate(correction, start=2))
    basis = rr ** (-N - theta)
    # relative least squares so the decade is weighted evenly
    tail_coeff = float(np.sum(resid * basis / values[last] ** 2) / np.sum(basis**2 / values[last] ** 2))

    mass = _profile_mass(radii, values, tail_coeff, correction, theta, N)
    if abs(mass - 1.0) > spec.mass_tol:
        raise KernelBuildError(f"mass defect {mass - 1.0:.3e} exceeds {spec.mass_tol:.1e}")
    return KernelProfile(theta, N, radii, values, tail_coeff, correction, mass, quad_error, tolerances)


def eval_kernel(x, t: float, profile: KernelProfile):
    """G(x, t) via the self-similar rescaling of the unit-time table.

    For N = 1 ``x`` holds coordinates of any shape; for N > 1 its last axis
    has length N.
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if profile.N == 1 else np.sqrt(np.sum(x * x, axis=-1))
    scale = t ** (-1.0 / profile.theta)
    return scale**profile.N * profile.radial(r * scale)


# -- subordination oracle (theta = 1) -------------------------------------------


def subordinator_density(s, t: float, theta: float = 1.0):
    """Density of the 1/2-stable subordinator at time t (only theta = 1)."""
    if theta != 1.0:
        raise NotImplementedError("the subordinator density is only available in closed form for theta = 1")
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = t / math.sqrt(4.0 * math.pi) * s**-1.5 * np.exp(-(t * t) / (4.0 * s))
    return np.where(s > 0.0, out, 0.0)


def subordination_kernel(r: float, t: float, N: int = 1) -> float:
    """G(r, t) for theta = 1 by averaging heat kernels against the subordinator."""

    def integrand(logs):
        s = math.exp(logs)
        heat = (4.0 * math.pi * s) ** (-N / 2.0) * math.exp(-r * r / (4.0 * s))
        return float(subordinator_density(s, t)) * heat * s

    # the integrand peaks near s ~ (t^2 + r^2)/4 on a log scale
    centre = math.log((t * t + r * r) / 4.0 + 1e-300)
    val, _ = integrate.quad(integrand, centre - 40.0, centre + 60.0, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


# -- Chapman-Kolmogorov check ---------------------------------------------------


def check_semigroup_identity(profile: KernelProfile, s: float, t: float, grid: Grid) -> dict:
    """Compare G(., s) * G(., t-s) with G(., t) on ``grid`` (N = 1 or 2).

    The convolution is linear (zero padded), so mass outside the box is lost;
    the deviation is reported over the inner half of the box.
    """
    if not 0.0 < s < t:
        raise ValueError("need 0 < s < t")
    coords = np.stack(grid.coords, axis=-1) if grid.N > 1 else grid.axis
    a = eval_kernel(coords, s, profile)
    b = eval_kernel(coords, t - s, profile)
    target = eval_kernel(coords, t, profile)
    full = signal.fftconvolve(a, b, mode="full") * grid.cell_volume
    # full index k sits at -2L + k h, so node j of the grid is k = j + M/2
    cut = slice(grid.M // 2, grid.M // 2 + grid.M)
    conv = full[(cut,) * grid.N]
    inner = grid.radius <= grid.L / 2.0
    dev = np.abs(conv - target)[inner]
    # relative error only where the target is representable well above underflow
    live = target[inner] > 1e-8 * target.max()
    return {
        "s": s,
        "t": t,
        "max_abs_error": float(dev.max()),
        "max_rel_error": float((dev[live] / target[inner][live]).max()),
        "peak": float(target.max()),
    }


# -- persistence -----------------------------------------------------------------


def save_profile(profile: KernelProfile, path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=1))


def load_profile(path) -> KernelProfile:
    return KernelProfile.from_dict(json.loads(Path(path).read_text()))
