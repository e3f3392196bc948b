"""Run one experiment end to end and persist its outputs."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .forward import closed_form_power
from .plotting import normalized_db, plot_beampattern, plot_history
from .selection import HardSelection
from .trainer import DivergenceError, TrainResult, selector_diagnostics, train, weighted_mse

logger = logging.getLogger(__name__)

PENALTY_FLAG = 1e-2
HISTORY_FIELDS = ("step", "epoch", "stage", "loss", "pattern_error",
                  "penalty_rf", "penalty_ant", "alpha_rf", "alpha_ant")


@dataclass
class RunResult:
    config: ExperimentConfig
    rf_selection: HardSelection
    antenna_selection: HardSelection
    phases: np.ndarray
    precoder: np.ndarray
    angles: np.ndarray
    desired: np.ndarray
    achieved_soft: np.ndarray
    achieved_hard: np.ndarray
    history: list
    diagnostics: dict
    duration: float

    @property
    def flagged(self) -> bool:
        """True when the selectors did not settle on valid binary matrices."""
        return self.diagnostics["total_penalty"] >= PENALTY_FLAG


def summarize(config: ExperimentConfig, trained: TrainResult, duration: float = 0.0) -> RunResult:
    problem = config.problem()
    state = trained.state
    A = problem.steering
    F = trained.phases.matrix
    Q = trained.precoder.matrix
    soft = closed_form_power(A, state.selector_matrix(problem, "b1"),
                             state.selector_matrix(problem, "b2"), F, Q)
    hard = closed_form_power(A, trained.rf_selection.matrix(),
                             trained.antenna_selection.matrix(), F, Q)
    diag = selector_diagnostics(state, problem)
    target = problem.target
    r = target.desired_power - hard
    diag.update(
        total_penalty=diag["rf"]["penalty"] + diag["antenna"]["penalty"],
        pattern_error_hard=float(np.sum(target.weights * r * r)),
        mse_hard=weighted_mse(target, hard),
        final_loss=state.history[-1]["loss"] if state.history else None,
    )
    return RunResult(config, trained.rf_selection, trained.antenna_selection,
                     trained.phases.phases.copy(), Q, target.grid.angles_deg.copy(),
                     target.desired_power.copy(), soft, hard, state.history, diag, duration)


def run(config: ExperimentConfig, out_dir=None) -> RunResult:
    """Train the design described by ``config``; write outputs if ``out_dir`` is given."""
    problem = config.problem()
    logger.info("run %s: mode %s, N_t=%d N_RF=%d M_RF=%d M_t=%d", config.name, config.mode,
                config.n_antennas, config.n_rf, config.m_rf, config.m_t)
    t0 = time.perf_counter()
    try:
        trained = train(config.plan, problem)
    except DivergenceError as exc:
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            _dump_json(Path(out_dir) / "divergence.json",
                       {"error": str(exc), "config": config.to_dict(), **exc.snapshot})
        raise
    result = summarize(config, trained, time.perf_counter() - t0)
    if result.flagged:
        logger.warning("run %s: selectors not converged (total penalty %.3g)",
                       config.name, result.diagnostics["total_penalty"])
    if out_dir is not None:
        emit_outputs(result, out_dir)
    return result


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _dump_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def emit_outputs(result: RunResult, out_dir) -> dict:
    """Write beampattern.csv, history.csv, result.json, timing.json and the SVG figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in (
        "beampattern.csv", "history.csv", "result.json", "timing.json",
        "beampattern.svg", "history.svg")}

    db = normalized_db(result.achieved_hard)
    _write_csv(paths["beampattern.csv"],
               ["angle_deg", "desired", "achieved_soft", "achieved_hard", "achieved_hard_db_normalized"],
               ([float(a), float(p), float(s), float(h), float(d)] for a, p, s, h, d in zip(
                   result.angles, result.desired, result.achieved_soft, result.achieved_hard, db)))
    _write_csv(paths["history.csv"], HISTORY_FIELDS,
               ([rec[k] for k in HISTORY_FIELDS] for rec in result.history))

    cfg = result.config
    _dump_json(paths["result.json"], {
        "rf_indices": list(result.rf_selection.indices),
        "antenna_indices": list(result.antenna_selection.indices),
        "mode": cfg.mode,
        "diagnostics": result.diagnostics,
        "flagged": result.flagged,
        "phases": result.phases.tolist(),
        "precoder": {"real": result.precoder.real.tolist(), "imag": result.precoder.imag.tolist()},
        "config": cfg.to_dict(),
    })
    # wall-clock time lives apart from result.json so that file stays reproducible
    _dump_json(paths["timing.json"], {"duration_s": result.duration})

    title = (f"{cfg.name}: M_RF={cfg.m_rf}/{cfg.n_rf}, M_t={cfg.m_t}/{cfg.n_antennas}")
    plot_beampattern(result.angles, result.desired, result.achieved_soft, result.achieved_hard,
                     paths["beampattern.svg"], title=title, intervals=cfg.intervals)
    if result.history:
        plot_history(result.history, paths["history.svg"], title=cfg.name)
    else:
        paths.pop("history.svg")
    return paths
