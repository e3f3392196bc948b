"""Hybrid analog-digital transmit chain and beampattern powers.

The sparse-array output at the grid angles is

    Y = A^H (S2^T S2) F_RF (S1^T S1) Q E

with ``A`` the ``N_t x K`` steering matrix, ``F_RF = exp(j Phi)`` the phase-shifter
network, ``Q`` the baseband precoder and ``E`` a batch of white snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import TargetPattern
from .selection import orthonormality_penalty


class DimensionError(ValueError):
    """Operands of the transmit chain do not line up."""


@dataclass
class PhaseNetwork:
    phases: np.ndarray

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)

    @property
    def matrix(self) -> np.ndarray:
        # unit modulus holds by construction for any real phase
        return np.exp(1j * self.phases)

    @classmethod
    def init(cls, n_antennas: int, n_rf: int, rng: np.random.Generator) -> "PhaseNetwork":
        return cls(rng.uniform(0.0, 2 * np.pi, size=(n_antennas, n_rf)))


@dataclass
class Precoder:
    q_real: np.ndarray
    q_imag: np.ndarray

    def __post_init__(self):
        self.q_real = np.asarray(self.q_real, dtype=float)
        self.q_imag = np.asarray(self.q_imag, dtype=float)
        if self.q_real.shape != self.q_imag.shape:
            raise DimensionError("real and imaginary precoder parts differ in shape")

    @property
    def matrix(self) -> np.ndarray:
        return self.q_real + 1j * self.q_imag

    @classmethod
    def from_complex(cls, Q) -> "Precoder":
        Q = np.asarray(Q, dtype=complex)
        return cls(Q.real.copy(), Q.imag.copy())

    @classmethod
    def init(cls, n_rf: int, rng: np.random.Generator) -> "Precoder":
        Q = complex_gaussian(rng, (n_rf, n_rf)) / np.sqrt(n_rf)
        return cls.from_complex(Q)


@dataclass(frozen=True)
class SnapshotBatch:
    """``N_RF x T`` matrix whose columns are the snapshots ``e(t)``."""

    samples: np.ndarray

    @property
    def T(self) -> int:
        return self.samples.shape[1]


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex normal entries with unit total variance."""
    scale = np.sqrt(0.5)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_snapshots(n_rf: int, T: int, rng_seed) -> SnapshotBatch:
    """White unit-covariance snapshots; ``rng_seed`` may be an int or a Generator."""
    if T < 1:
        raise ValueError(f"snapshot count must be >= 1, got {T}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return SnapshotBatch(complex_gaussian(rng, (n_rf, T)))


def _check_chain(A, S1, S2, F, Q):
    n_t, _ = A.shape
    if F.shape[0] != n_t:
        raise DimensionError(f"F_RF has {F.shape[0]} rows, steering matrix has {n_t}")
    n_rf = F.shape[1]
    if S1.shape[1] != n_rf:
        raise DimensionError(f"S1 has {S1.shape[1]} columns, expected N_RF = {n_rf}")
    if S2.shape[1] != n_t:
        raise DimensionError(f"S2 has {S2.shape[1]} columns, expected N_t = {n_t}")
    if Q.shape != (n_rf, n_rf):
        raise DimensionError(f"Q has shape {Q.shape}, expected ({n_rf}, {n_rf})")


def transmit_matrix(A, S1, S2, F, Q) -> np.ndarray:
    """``K x N_RF`` map ``A^H S2^T S2 F S1^T S1 Q`` from snapshots to angle outputs."""
    A, S1, S2, F, Q = (np.asarray(x) for x in (A, S1, S2, F, Q))
    _check_chain(A, S1, S2, F, Q)
    D1 = S1.T @ S1
    D2 = S2.T @ S2
    return A.conj().T @ (D2 @ (F @ (D1 @ Q)))


def soft_forward(A, S1, S2, F, Q, batch: SnapshotBatch) -> np.ndarray:
    """Outputs ``y_s(t; theta_k)`` as a ``K x T`` complex matrix."""
    H = transmit_matrix(A, S1, S2, F, Q)
    E = batch.samples
    if E.shape[0] != H.shape[1]:
        raise DimensionError(f"snapshots have length {E.shape[0]}, expected {H.shape[1]}")
    return H @ E


def empirical_power(outputs) -> np.ndarray:
    """Average power over snapshots, one value per angle."""
    Y = np.asarray(outputs)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ValueError("outputs must be a K x T matrix with T >= 1")
    return np.mean(Y.real**2 + Y.imag**2, axis=1)


def closed_form_power(A, S1, S2, F, Q) -> np.ndarray:
    """Expected power ``a^H M Q Q^H M^H a`` per angle, i.e. the squared row norms of the transmit matrix."""
    H = transmit_matrix(A, S1, S2, F, Q)
    return np.sum(H.real**2 + H.imag**2, axis=1)


def beampattern_error(target: TargetPattern, powers) -> float:
    powers = np.asarray(powers, dtype=float)
    if powers.shape != target.desired_power.shape:
        raise ValueError(f"expected {target.desired_power.size} powers, got {powers.size}")
    r = target.desired_power - powers
    return float(np.sum(target.weights * r * r))


def total_loss(A, target: TargetPattern, S1, S2, F, Q, batch: SnapshotBatch,
               alpha1: float, alpha2: float) -> float:
    """Pattern error on empirical powers plus weighted selection penalties."""
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    powers = empirical_power(soft_forward(A, S1, S2, F, Q, batch))
    return (beampattern_error(target, powers)
            + alpha1 * orthonormality_penalty(S1)
            + alpha2 * orthonormality_penalty(S2))
