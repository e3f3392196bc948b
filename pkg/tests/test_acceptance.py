"""Exit criteria for the desk-scale reproduction.

Each test appends one PASS/FAIL line to the ``acceptance criteria`` section of
the pytest terminal summary. Criterion 5 is soft: a violated ordering is printed
as FLAG and raises a warning instead of failing.
"""

import time
import warnings

import numpy as np
import pytest

from beamforge.array import AngleGrid, ArrayGeometry, TargetPattern, steering_matrix
from beamforge.cli import main
from beamforge.config import load_config
from beamforge.forward import PhaseNetwork, Precoder, closed_form_power, draw_snapshots, empirical_power, soft_forward
from beamforge.plotting import normalized_db
from beamforge.runner import run
from beamforge.trainer import (
    GROUPS,
    Problem,
    TrainPlan,
    evaluate,
    gradient,
    init_state,
    random_selection_baseline,
    train,
    weighted_mse,
)

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def report(tag, ok, detail):
    if not isinstance(ok, str):
        ok = "PASS" if ok else "FAIL"
    line = f"[{ok}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _fd(problem, state, batch, a1, a2, group, h=1e-5):
    param = state.params[group]
    out = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        orig = param[idx]
        param[idx] = orig + h
        up = evaluate(problem, state, batch, a1, a2)[0]["loss"]
        param[idx] = orig - h
        down = evaluate(problem, state, batch, a1, a2)[0]["loss"]
        param[idx] = orig
        out[idx] = (up - down) / (2 * h)
    return out


def test_c1_gradient_oracle():
    t0 = time.perf_counter()
    worst_rel, failures, checked = 0.0, 0, 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        n_t, n_rf = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        m_rf, m_t = int(rng.integers(1, n_rf)), int(rng.integers(1, n_t))
        k = int(rng.integers(3, 8))
        T = int(rng.integers(max(m_rf, m_t) + 1, 11))
        grid = AngleGrid(np.sort(rng.choice(np.arange(-85, 86), k, replace=False)).astype(float))
        target = TargetPattern(grid, rng.uniform(0, 2, k), rng.uniform(0.5, 2, k))
        problem = Problem(steering_matrix(ArrayGeometry(n_t), grid), target, n_rf, m_rf, m_t)
        state = init_state(problem, TrainPlan(snapshots=T, seed=seed))
        state.params["b1"] = rng.standard_normal(state.params["b1"].shape)
        state.params["b2"] = rng.standard_normal(state.params["b2"].shape)
        a1, a2 = rng.uniform(0.5, 5, 2)
        for batch in (draw_snapshots(n_rf, T, rng), None):
            for group in GROUPS:
                g = gradient(group, state, problem, batch, a1, a2)
                fd = _fd(problem, state, batch, a1, a2, group)
                err = np.abs(g - fd)
                ok = (err <= 1e-4 * np.abs(fd)) | (err < 1e-7)
                failures += int((~ok).sum())
                checked += ok.size
                big = np.abs(fd) > 1e-3
                if big.any():
                    worst_rel = max(worst_rel, float(np.max(err[big] / np.abs(fd[big]))))
    elapsed = time.perf_counter() - t0
    passed = failures == 0 and elapsed < 30
    report("C1 gradient oracle", passed,
           f"{checked} entries over 20 instances x 4 groups x 2 power paths, {failures} outside tolerance, "
           f"worst rel err {worst_rel:.2e}, {elapsed:.1f}s (< 30s)")
    assert failures == 0
    assert elapsed < 30


def test_c2_power_model_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    grid = AngleGrid.uniform(-60, 60, 7)
    A = steering_matrix(ArrayGeometry(4), grid)
    F = PhaseNetwork.init(4, 2, rng).matrix
    Q = Precoder.init(2, rng).matrix
    S1, S2 = np.eye(2), np.eye(4)[[0, 1, 3]]
    p_hat = closed_form_power(A, S1, S2, F, Q)
    # accumulate in chunks to bound memory; the result equals the one-shot mean
    T, chunk = 1_000_000, 200_000
    acc = np.zeros(len(grid))
    for _ in range(T // chunk):
        acc += chunk * empirical_power(soft_forward(A, S1, S2, F, Q, draw_snapshots(2, chunk, rng)))
    p_tilde = acc / T
    mask = p_hat > 0.1
    rel = np.abs(p_tilde[mask] / p_hat[mask] - 1)
    elapsed = time.perf_counter() - t0
    passed = bool(mask.any() and rel.max() < 0.01 and elapsed < 60)
    report("C2 power-model oracle", passed,
           f"max rel gap {rel.max():.2e} over {mask.sum()} angles (< 1e-2), {elapsed:.1f}s (< 60s)")
    assert mask.any()
    assert rel.max() < 0.01
    assert elapsed < 60


@pytest.fixture(scope="module")
def desk_runs():
    cfg = load_config("desk")
    t0 = time.perf_counter()
    results = [run(cfg.with_overrides(seed=s)) for s in range(10)]
    return cfg, results, time.perf_counter() - t0


def test_c3_constraint_hardening(desk_runs):
    cfg, results, elapsed = desk_runs
    assert (cfg.n_antennas, cfg.n_rf, cfg.m_rf, cfg.m_t, cfg.grid[2]) == (32, 16, 8, 32, 61)
    assert (cfg.plan.n_epochs, cfg.plan.n_steps) == (400, 10)
    peaks, pens = [], []
    for r in results:
        d = r.diagnostics
        peaks.append(min(d["rf"]["min_row_peak"], d["antenna"]["min_row_peak"]))
        pens.append(d["total_penalty"])
    good = sum(p >= 0.99 and q < 1e-2 for p, q in zip(peaks, pens))
    passed = good >= 8 and elapsed < 600
    report("C3 constraint hardening", passed,
           f"{good}/10 seeds hardened (need 8); min row peaks {np.round(peaks, 4).tolist()}; "
           f"max penalty {max(pens):.2e}; {elapsed:.0f}s (< 600s)")
    assert good >= 8
    assert elapsed < 600


def test_c4_beampattern_quality(desk_runs):
    cfg, results, _ = desk_runs
    design = results[0]
    problem = cfg.problem()
    target = problem.target
    mse = weighted_mse(target, design.achieved_hard)
    baseline = random_selection_baseline(problem, cfg.plan, n_trials=50, n_epochs=50, seed=4)
    median = float(np.median(baseline))
    db = normalized_db(design.achieved_hard)
    in_band = db[target.desired_power > 0]
    ratio = median / mse
    passed = ratio >= 5 and in_band.min() >= -3
    report("C4 beampattern quality", passed,
           f"design MSE {mse:.3e} vs random-selection median {median:.3e} ({ratio:.0f}x, need >= 5x); "
           f"lowest in-band response {in_band.min():.2f} dB (>= -3 dB)")
    assert ratio >= 5
    assert in_band.min() >= -3


def test_c5_selection_mode_ordering():
    medians = {}
    for mode in ("rf", "antennas", "hybrid"):
        cfg = load_config(f"desk-modes-{mode}")
        assert (cfg.n_antennas, cfg.n_rf) == (32, 16)
        errs = [run(cfg.with_overrides(seed=s)).diagnostics["pattern_error_hard"] for s in range(10)]
        medians[mode] = float(np.median(errs))
    ordered = medians["rf"] <= medians["antennas"] <= medians["hybrid"]
    detail = (f"median final pattern error rf-only {medians['rf']:.4f}, antennas-only "
              f"{medians['antennas']:.4f}, hybrid {medians['hybrid']:.4f}")
    report("C5 selection-mode ordering (soft)", "PASS" if ordered else "FLAG", detail)
    if not ordered:
        warnings.warn(f"selection-mode ordering violated: {detail}")
    assert all(np.isfinite(v) for v in medians.values())


def test_c6_determinism(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", "--config", "desk", "--seed", "7", "--out", str(out)]) == 0
    same = {name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            for name in ("beampattern.csv", "history.csv", "result.json")}
    report("C6 determinism", all(same.values()),
           ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert all(same.values())


def test_c7_degenerate_reduction():
    cfg = load_config("desk").with_overrides(epochs=20)
    from dataclasses import replace
    cfg = replace(cfg, m_rf=cfg.n_rf, m_t=cfg.n_antennas)
    problem = cfg.problem()
    assert problem.pinned("b1") and problem.pinned("b2")
    result = train(cfg.plan, problem)
    state = result.state
    S1 = state.selector_matrix(problem, "b1")
    S2 = state.selector_matrix(problem, "b2")
    F, Q = result.phases.matrix, result.precoder.matrix
    batch = draw_snapshots(cfg.n_rf, cfg.plan.snapshots, 99)
    pipeline = soft_forward(problem.steering, S1, S2, F, Q, batch)
    dense = problem.steering.conj().T @ F @ Q @ batch.samples
    gap = float(np.max(np.abs(pipeline - dense)))
    p_pipeline = evaluate(problem, state, batch, 0.0, 0.0)[0]["pattern_error"]
    p_dense = float(np.sum((empirical_power(dense) - problem.target.desired_power) ** 2))
    passed = gap < 1e-12 and abs(p_pipeline - p_dense) <= 1e-12 * max(1.0, p_dense)
    report("C7 degenerate reduction", passed,
           f"max |pipeline - dense| = {gap:.1e} per output sample (< 1e-12); selector stages run: "
           f"{sorted({r['stage'] for r in state.history})}")
    assert gap < 1e-12
    assert abs(p_pipeline - p_dense) <= 1e-12 * max(1.0, p_dense)
    assert {r["stage"] for r in state.history} == {"phi", "q"}
