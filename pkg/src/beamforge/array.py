"""Uniform linear array geometry, steering vectors and target beampatterns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """ULA with ``n_antennas`` elements spaced ``spacing`` wavelengths apart."""

    n_antennas: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ValueError(f"n_antennas must be a positive integer, got {self.n_antennas}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")


@dataclass(frozen=True)
class AngleGrid:
    angles_deg: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=float).ravel()
        if angles.size < 1:
            raise ValueError("angle grid needs at least one angle")
        if np.any(np.abs(angles) > 90):
            raise ValueError("angles must lie within [-90, 90] degrees")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        angles.setflags(write=False)
        object.__setattr__(self, "angles_deg", angles)

    @classmethod
    def uniform(cls, start: float = -90.0, stop: float = 90.0, num: int = 181) -> "AngleGrid":
        return cls(np.linspace(start, stop, num))

    def __len__(self):
        return self.angles_deg.size


@dataclass(frozen=True)
class TargetPattern:
    """Desired power ``p_k`` and importance weight ``gamma_k`` on each grid angle."""

    grid: AngleGrid
    desired_power: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        k = len(self.grid)
        p = np.asarray(self.desired_power, dtype=float).ravel()
        w = np.ones(k) if self.weights is None else np.asarray(self.weights, dtype=float).ravel()
        if p.size != k or w.size != k:
            raise ValueError(f"desired_power and weights must have length {k}")
        if np.any(p < 0) or np.any(w < 0):
            raise ValueError("desired_power and weights must be nonnegative")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "desired_power", p)
        object.__setattr__(self, "weights", w)


def _check_angles(theta_deg):
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(np.abs(theta) > 90):
        raise ValueError(f"steering angle must lie within [-90, 90] degrees, got {theta_deg}")
    return theta


def steering_vector(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Element ``n`` is ``exp(j 2 pi n (d/lambda) sin(theta))``; element 0 is the reference."""
    theta = _check_angles(theta_deg)
    if theta.ndim != 0:
        raise ValueError("steering_vector takes a scalar angle; use steering_matrix for a grid")
    n = np.arange(geom.n_antennas)
    return np.exp(2j * np.pi * geom.spacing * n * np.sin(np.deg2rad(theta)))


def steering_matrix(geom: ArrayGeometry, grid: AngleGrid) -> np.ndarray:
    """``N_t x K`` matrix whose k-th column is the steering vector at ``grid[k]``."""
    return np.stack([steering_vector(geom, theta) for theta in grid.angles_deg], axis=1)


def pattern_from_intervals(
    grid: AngleGrid,
    intervals: Sequence[Sequence[float]],
    level: float = 1.0,
) -> TargetPattern:
    """Flat-weighted target: ``level`` inside any closed interval, zero elsewhere."""
    angles = grid.angles_deg
    mask = np.zeros(angles.size, dtype=bool)
    for lo, hi in intervals:
        if lo > hi:
            raise ValueError(f"interval [{lo}, {hi}] has lo > hi")
        mask |= (angles >= lo) & (angles <= hi)
    return TargetPattern(grid, np.where(mask, float(level), 0.0))
