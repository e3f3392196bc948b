"""Softmax selection networks with bias-only parameters.

Each row of a soft selection matrix is the output of one softmax network whose
input is fixed at zero, so the biases are the only trainable parameters. A row
converges to a one-hot vector when the network commits to a single column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SoftSelector:
    """``n_choose`` softmax rows over ``n_from`` candidates."""

    biases: np.ndarray

    def __post_init__(self):
        self.biases = np.asarray(self.biases, dtype=float)
        if self.biases.ndim != 2:
            raise ValueError("biases must be a 2-D array (n_choose x n_from)")
        if self.n_choose > self.n_from:
            raise ValueError(f"cannot choose {self.n_choose} of {self.n_from}")

    @property
    def n_choose(self) -> int:
        return self.biases.shape[0]

    @property
    def n_from(self) -> int:
        return self.biases.shape[1]

    @classmethod
    def init(cls, n_choose: int, n_from: int, rng: np.random.Generator, scale: float = 0.01):
        # tiny noise breaks the row symmetry of an all-zero start
        return cls(rng.uniform(-scale, scale, size=(n_choose, n_from)))


@dataclass(frozen=True)
class HardSelection:
    """Chosen column per row; ``indices[m]`` is the m-th selected candidate."""

    indices: tuple
    n_from: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"selection indices must be distinct, got {idx}")
        if any(i < 0 or i >= self.n_from for i in idx):
            raise ValueError(f"selection indices must lie in [0, {self.n_from})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def identity(cls, n: int) -> "HardSelection":
        return cls(tuple(range(n)), n)

    def matrix(self) -> np.ndarray:
        """Binary ``M x N`` selection matrix with a single one per row."""
        S = np.zeros((len(self.indices), self.n_from))
        S[np.arange(len(self.indices)), self.indices] = 1.0
        return S


def softmax_rows(biases: np.ndarray) -> np.ndarray:
    b = np.asarray(biases, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("selector biases must be finite")
    z = np.exp(b - b.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def soft_matrix(sel: SoftSelector) -> np.ndarray:
    return softmax_rows(sel.biases)


def softmax_rows_backward(S: np.ndarray, grad_S: np.ndarray) -> np.ndarray:
    """Pull ``dL/dS`` back through the row softmax to ``dL/db``."""
    return S * (grad_S - np.sum(S * grad_S, axis=1, keepdims=True))


def orthonormality_penalty(S: np.ndarray) -> float:
    """``||S S^T - I||_F^2``; zero exactly for valid binary selection matrices."""
    S = np.asarray(S, dtype=float)
    R = S @ S.T - np.eye(S.shape[0])
    return float(np.sum(R * R))


def orthonormality_penalty_grad(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return 4.0 * (S @ S.T - np.eye(S.shape[0])) @ S


def harden(sel) -> HardSelection:
    """Extract distinct column indices from a soft selector (or soft matrix).

    Rows are served in descending order of their peak probability; each row takes
    its most probable column that is still free, lowest index on ties.
    """
    S = soft_matrix(sel) if isinstance(sel, SoftSelector) else np.asarray(sel, dtype=float)
    m, n = S.shape
    # stable sort keeps the lower row first among equal peaks
    order = np.argsort(-S.max(axis=1), kind="stable")
    taken = np.zeros(n, dtype=bool)
    indices = [0] * m
    for row in order:
        probs = np.where(taken, -np.inf, S[row])
        col = int(np.argmax(probs))
        taken[col] = True
        indices[row] = col
    return HardSelection(tuple(indices), n)


def hardness_report(sel) -> tuple[float, float]:
    """(smallest row peak, orthonormality penalty) of the soft matrix."""
    S = soft_matrix(sel) if isinstance(sel, SoftSelector) else np.asarray(sel, dtype=float)
    return float(S.max(axis=1).min()), orthonormality_penalty(S)
