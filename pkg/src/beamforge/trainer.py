"""Alternating Adam training of selectors, phase network and precoder.

Four parameter groups are trained in a fixed order every epoch:

    b1  (RF-chain selector biases)
    phi (phase-shifter network phases)
    b2  (antenna selector biases)
    q   (precoder, stored as stacked real and imaginary parts)

Each stage runs ``n_steps`` Adam updates on its own group while the other three
stay frozen. A selector with ``M == N`` has nothing to choose and is pinned to the
identity; its stage is skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .array import TargetPattern
from .selection import (
    HardSelection,
    harden,
    hardness_report,
    orthonormality_penalty,
    orthonormality_penalty_grad,
    softmax_rows,
    softmax_rows_backward,
)
from .forward import PhaseNetwork, Precoder, SnapshotBatch, complex_gaussian

logger = logging.getLogger(__name__)

GROUPS = ("b1", "phi", "b2", "q")
DIVERGENCE_LIMIT = 1e12


class NumericalError(FloatingPointError):
    """A non-finite value appeared while evaluating the loss or its gradient."""


class DivergenceError(NumericalError):
    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}


@dataclass(frozen=True)
class TrainPlan:
    n_epochs: int = 400
    n_steps: int = 10
    lr: float = 0.04
    alpha_init: float = 3200.0
    alpha_final: float = 16000.0
    snapshots: int = 64
    seed: int = 0
    power_path: str = "empirical"
    resample: bool = True
    # optional (init, final) schedules overriding the shared one per penalty
    alpha1: Optional[tuple] = None
    alpha2: Optional[tuple] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.n_epochs < 1 or self.n_steps < 1:
            raise ValueError("n_epochs and n_steps must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        schedules = [(self.alpha_init, self.alpha_final)]
        schedules += [s for s in (self.alpha1, self.alpha2) if s]
        for lo, hi in schedules:
            if not hi >= lo >= 0:
                raise ValueError(f"alpha schedule must satisfy final >= init >= 0, got {lo} -> {hi}")
        if self.power_path not in ("empirical", "closed-form"):
            raise ValueError(f"unknown power path {self.power_path!r}")
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")

    def check_snapshots(self, m_rf: int, m_t: int):
        if self.power_path == "empirical" and self.snapshots <= max(m_rf, m_t):
            raise ValueError(
                f"snapshot count {self.snapshots} must exceed max(M_RF, M_t) = {max(m_rf, m_t)}")


def _linear(init, final, n_epochs, epoch):
    if n_epochs == 1:
        return float(init)
    return init + (final - init) * (epoch - 1) / (n_epochs - 1)


def alpha_at(plan: TrainPlan, epoch: int) -> float:
    """Penalty weight for a 1-based epoch, ramping linearly from init to final."""
    if not 1 <= epoch <= plan.n_epochs:
        raise ValueError(f"epoch {epoch} outside 1..{plan.n_epochs}")
    return float(_linear(plan.alpha_init, plan.alpha_final, plan.n_epochs, epoch))


def alphas_at(plan: TrainPlan, epoch: int) -> tuple[float, float]:
    shared = alpha_at(plan, epoch)
    a1 = _linear(*plan.alpha1, plan.n_epochs, epoch) if plan.alpha1 else shared
    a2 = _linear(*plan.alpha2, plan.n_epochs, epoch) if plan.alpha2 else shared
    return float(a1), float(a2)


@dataclass
class Problem:
    """Fixed data of one design: steering matrix, target and selection sizes.

    ``pin_rf`` / ``pin_ant`` freeze a selector at a hard selection; a selector with
    nothing to choose is pinned to the identity automatically.
    """

    steering: np.ndarray
    target: TargetPattern
    n_rf: int
    m_rf: int
    m_t: int
    pin_rf: Optional[HardSelection] = None
    pin_ant: Optional[HardSelection] = None

    def __post_init__(self):
        self.steering = np.asarray(self.steering, dtype=complex)
        n_t, k = self.steering.shape
        if k != len(self.target.grid):
            raise ValueError(f"steering matrix has {k} columns, target has {len(self.target.grid)} angles")
        if not (1 <= self.m_rf <= self.n_rf):
            raise ValueError(f"need 1 <= M_RF <= N_RF, got M_RF={self.m_rf}, N_RF={self.n_rf}")
        if not (1 <= self.m_t <= n_t):
            raise ValueError(f"need 1 <= M_t <= N_t, got M_t={self.m_t}, N_t={n_t}")
        if self.pin_rf is None and self.m_rf == self.n_rf:
            self.pin_rf = HardSelection.identity(self.n_rf)
        if self.pin_ant is None and self.m_t == n_t:
            self.pin_ant = HardSelection.identity(n_t)
        self._hermitian = self.steering.conj().T

    @property
    def n_t(self) -> int:
        return self.steering.shape[0]

    def pinned(self, group: str) -> bool:
        return {"b1": self.pin_rf, "b2": self.pin_ant}.get(group) is not None


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param):
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_step(moments: AdamState, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8) -> np.ndarray:
    """Bias-corrected Adam; updates ``moments`` in place and returns the parameter delta."""
    moments.t += 1
    moments.m *= beta1
    moments.m += (1 - beta1) * grad
    moments.v *= beta2
    moments.v += (1 - beta2) * (grad * grad)
    m_hat = moments.m / (1 - beta1**moments.t)
    v_hat = moments.v / (1 - beta2**moments.t)
    return -lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class TrainState:
    params: dict
    moments: dict
    data_rng: np.random.Generator
    fixed_batch: Optional[SnapshotBatch] = None
    epoch: int = 0
    history: list = field(default_factory=list)

    def selector_matrix(self, problem: Problem, group: str) -> np.ndarray:
        pin = problem.pin_rf if group == "b1" else problem.pin_ant
        if pin is not None:
            return pin.matrix()
        return softmax_rows(self.params[group])

    @property
    def phases(self) -> PhaseNetwork:
        return PhaseNetwork(self.params["phi"])

    @property
    def precoder(self) -> Precoder:
        return Precoder(self.params["q"][0], self.params["q"][1])


def init_state(problem: Problem, plan: TrainPlan) -> TrainState:
    init_seq, data_seq = np.random.SeedSequence(plan.seed).spawn(2)
    rng = np.random.default_rng(init_seq)
    params = {}
    params["b1"] = None if problem.pin_rf else rng.uniform(-0.01, 0.01, (problem.m_rf, problem.n_rf))
    params["b2"] = None if problem.pin_ant else rng.uniform(-0.01, 0.01, (problem.m_t, problem.n_t))
    params["phi"] = PhaseNetwork.init(problem.n_t, problem.n_rf, rng).phases
    Q = complex_gaussian(rng, (problem.n_rf, problem.n_rf)) / np.sqrt(problem.n_rf)
    params["q"] = np.stack([Q.real, Q.imag])
    moments = {g: AdamState.zeros_like(p) for g, p in params.items() if p is not None}
    state = TrainState(params, moments, np.random.default_rng(data_seq))
    if plan.power_path == "empirical" and not plan.resample:
        state.fixed_batch = _draw(state.data_rng, problem.n_rf, plan.snapshots)
    return state


def _draw(rng, n_rf, T):
    return SnapshotBatch(complex_gaussian(rng, (n_rf, T)))


def evaluate(problem: Problem, state: TrainState, batch: Optional[SnapshotBatch],
             alpha1: float, alpha2: float, group: Optional[str] = None):
    """Loss terms and, if ``group`` is given, the gradient of the total loss w.r.t. it.

    ``batch=None`` evaluates the closed-form (expected) powers instead of the
    empirical average over snapshots.
    """
    S1 = state.selector_matrix(problem, "b1")
    S2 = state.selector_matrix(problem, "b2")
    F = np.exp(1j * state.params["phi"])
    q = state.params["q"]
    Q = q[0] + 1j * q[1]

    D1 = S1.T @ S1
    D2 = S2.T @ S2
    X1 = D1 @ Q
    Z = F @ X1
    H = problem._hermitian @ (D2 @ Z)
    if batch is None:
        Y, scale = H, 1.0
    else:
        Y, scale = H @ batch.samples, 1.0 / batch.T
    powers = scale * np.sum(Y.real**2 + Y.imag**2, axis=1)

    target = problem.target
    resid = powers - target.desired_power
    pattern = float(np.sum(target.weights * resid * resid))
    pen1 = orthonormality_penalty(S1)
    pen2 = orthonormality_penalty(S2)
    terms = {
        "loss": pattern + alpha1 * pen1 + alpha2 * pen2,
        "pattern_error": pattern,
        "penalty_rf": pen1,
        "penalty_ant": pen2,
    }
    if group is None:
        return terms, None

    # G holds 2 dL/dY*, so that dL = Re sum(conj(G) dY)
    G = (2.0 * scale) * (2.0 * target.weights * resid)[:, None] * Y
    GE = G if batch is None else G @ batch.samples.conj().T
    U = problem.steering @ GE
    V = D2 @ U
    if group == "q":
        GQ = D1 @ (F.conj().T @ V)
        grad = np.stack([GQ.real, GQ.imag])
    elif group == "phi":
        GF = V @ X1.conj().T
        grad = np.imag(GF * F.conj())
    elif group == "b1":
        R = np.real(F.conj().T @ V @ Q.conj().T)
        grad_S = S1 @ (R + R.T) + alpha1 * orthonormality_penalty_grad(S1)
        grad = softmax_rows_backward(S1, grad_S)
    elif group == "b2":
        R = np.real(U @ Z.conj().T)
        grad_S = S2 @ (R + R.T) + alpha2 * orthonormality_penalty_grad(S2)
        grad = softmax_rows_backward(S2, grad_S)
    else:
        raise ValueError(f"unknown parameter group {group!r}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite gradient for parameter group {group!r}")
    return terms, grad


def gradient(group: str, state: TrainState, problem: Problem, batch: Optional[SnapshotBatch],
             alpha1: float, alpha2: float) -> np.ndarray:
    """Analytic ``dL0/d(group)`` with every other group held fixed."""
    if problem.pinned(group):
        raise ValueError(f"parameter group {group!r} is pinned and has no gradient")
    return evaluate(problem, state, batch, alpha1, alpha2, group)[1]


def _next_batch(state: TrainState, problem: Problem, plan: TrainPlan):
    if plan.power_path == "closed-form":
        return None
    if state.fixed_batch is not None:
        return state.fixed_batch
    return _draw(state.data_rng, problem.n_rf, plan.snapshots)


def _snapshot(state, group, epoch, terms):
    return {
        "group": group,
        "epoch": epoch,
        "step": len(state.history),
        "terms": {k: float(v) for k, v in terms.items()},
        "params": {k: None if v is None else v.tolist() for k, v in state.params.items()},
    }


def run_stage(state: TrainState, problem: Problem, group: str, n_steps: int, plan: TrainPlan,
              alphas: Optional[tuple] = None) -> TrainState:
    """Run ``n_steps`` Adam updates on ``group``; the other groups are left untouched."""
    if group not in GROUPS:
        raise ValueError(f"unknown parameter group {group!r}")
    if problem.pinned(group) or n_steps == 0:
        return state
    epoch = max(state.epoch, 1)
    alpha1, alpha2 = alphas if alphas is not None else alphas_at(plan, epoch)
    param = state.params[group]
    for _ in range(n_steps):
        batch = _next_batch(state, problem, plan)
        terms, grad = evaluate(problem, state, batch, alpha1, alpha2, group)
        loss = terms["loss"]
        if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"loss {loss:.6g} diverged at step {len(state.history)} (stage {group}, epoch {epoch})",
                _snapshot(state, group, epoch, terms))
        param += adam_step(state.moments[group], grad, plan.lr, plan.beta1, plan.beta2, plan.eps)
        state.history.append({
            "step": len(state.history) + 1,
            "epoch": epoch,
            "stage": group,
            "loss": loss,
            "pattern_error": terms["pattern_error"],
            "penalty_rf": terms["penalty_rf"],
            "penalty_ant": terms["penalty_ant"],
            "alpha_rf": alpha1,
            "alpha_ant": alpha2,
        })
    return state


@dataclass
class TrainResult:
    state: TrainState
    rf_selection: HardSelection
    antenna_selection: HardSelection
    phases: PhaseNetwork
    precoder: Precoder

    @property
    def history(self) -> list:
        return self.state.history


def hard_selections(state: TrainState, problem: Problem) -> tuple[HardSelection, HardSelection]:
    rf = problem.pin_rf or harden(softmax_rows(state.params["b1"]))
    ant = problem.pin_ant or harden(softmax_rows(state.params["b2"]))
    return rf, ant


def selector_diagnostics(state: TrainState, problem: Problem) -> dict:
    out = {}
    for group, name in (("b1", "rf"), ("b2", "antenna")):
        peak, pen = hardness_report(state.selector_matrix(problem, group))
        out[name] = {"min_row_peak": peak, "penalty": pen}
    return out


def train(plan: TrainPlan, problem: Problem, groups=GROUPS,
          callback: Optional[Callable[[TrainState], None]] = None) -> TrainResult:
    """Alternate the stages of ``groups`` for ``plan.n_epochs`` epochs."""
    plan.check_snapshots(problem.m_rf, problem.m_t)
    state = init_state(problem, plan)
    for epoch in range(1, plan.n_epochs + 1):
        state.epoch = epoch
        alphas = alphas_at(plan, epoch)
        for group in groups:
            run_stage(state, problem, group, plan.n_steps, plan, alphas)
        if callback is not None:
            callback(state)
        if epoch % 50 == 0:
            last = state.history[-1] if state.history else {}
            logger.debug("epoch %d loss %.4g", epoch, last.get("loss", float("nan")))
    rf, ant = hard_selections(state, problem)
    return TrainResult(state, rf, ant, state.phases, state.precoder)


def random_selection_baseline(problem: Problem, plan: TrainPlan, n_trials: int = 50,
                              n_epochs: int = 50, seed: int = 0) -> np.ndarray:
    """Weighted beampattern MSE of uniformly random valid selections.

    For each trial both selectors are pinned to a random subset and only the
    phase network and precoder are trained, from a fresh start, for ``n_epochs``.
    """
    from .forward import closed_form_power

    rng = np.random.default_rng(seed)
    scores = np.empty(n_trials)
    for i in range(n_trials):
        rf = HardSelection(tuple(rng.choice(problem.n_rf, problem.m_rf, replace=False)), problem.n_rf)
        ant = HardSelection(tuple(rng.choice(problem.n_t, problem.m_t, replace=False)), problem.n_t)
        fixed = Problem(problem.steering, problem.target, problem.n_rf, problem.m_rf, problem.m_t,
                        pin_rf=rf, pin_ant=ant)
        sub = replace(plan, n_epochs=n_epochs, seed=int(rng.integers(2**31)))
        result = train(sub, fixed, groups=("phi", "q"))
        powers = closed_form_power(problem.steering, rf.matrix(), ant.matrix(),
                                   result.phases.matrix, result.precoder.matrix)
        scores[i] = weighted_mse(problem.target, powers)
    return scores


def weighted_mse(target: TargetPattern, powers) -> float:
    r = target.desired_power - np.asarray(powers, dtype=float)
    return float(np.mean(target.weights * r * r))
