"""Periodic box discretisation of R^N shared by the kernel and semigroup code."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L, L)^N sampled with M points per axis.

    Node j sits at -L + j*h, so the origin is always node M//2.
    """

    N: int
    L: float
    M: int

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ValueError(f"N must be 1 or 2 on a grid, got {self.N}")
        if self.M < 8 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of two >= 8, got {self.M}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    @property
    def origin_index(self) -> tuple[int, ...]:
        return (self.M // 2,) * self.N

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        if self.N == 1:
            return (self.axis,)
        return tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| at every node."""
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        """|xi| on the half-spectrum layout used by rfftn."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.M, d=self.h)
        if self.N == 1:
            return np.abs(kr)
        kx, ky = np.meshgrid(k, kr, indexing="ij")
        return np.sqrt(kx * kx + ky * ky)

    @cached_property
    def periodic_radius(self) -> np.ndarray:
        """Minimum-image distance from node 0 (used for convolution stencils)."""
        d = self.h * np.arange(self.M)
        d = np.minimum(d, 2.0 * self.L - d)
        if self.N == 1:
            return d
        dx, dy = np.meshgrid(d, d, indexing="ij")
        return np.sqrt(dx * dx + dy * dy)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def irfft(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(spectrum, s=self.shape, axes=tuple(range(self.N)))

    def to_dict(self) -> dict:
        return {"N": self.N, "L": float(self.L), "M": self.M}
