"""Simultaneous-perturbation stochastic approximation baseline.

Standard first-order SPSA with power-law gain schedules and a calibration
phase: an initial budget of energy evaluations estimates the typical
gradient magnitude at the start point, from which the step scale is chosen
so the first update has a target size.  Every energy evaluation (calibration
pairs included) is recorded in the trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bo import BORecord, BOTrace, best_seen_energy_error
from .errors import ConfigError

TARGET_FIRST_STEP = 2.0 * np.pi / 10.0


@dataclass
class SPSAConfig:
    max_evaluations: int = 1000
    calibration_evaluations: int = 50
    alpha_gain: float = 0.602
    gamma: float = 0.101
    stability: float | None = None  # A; defaults to 0.01 * iteration count
    c: float = 0.1
    a: float | None = None  # calibrated from initial gradient samples if None
    seed: int = 0

    def __post_init__(self):
        if self.calibration_evaluations % 2 or self.calibration_evaluations < 2:
            raise ConfigError("calibration budget must be a positive even count")
        if self.alpha_gain <= 0 or self.gamma <= 0 or self.c <= 0:
            raise ConfigError("gain parameters must be positive")
        if self.max_evaluations < self.calibration_evaluations:
            raise ConfigError("evaluation budget smaller than calibration budget")


def run_spsa(evaluator, cfg: SPSAConfig, theta0: np.ndarray,
             e_opt: float | None = None) -> BOTrace:
    """theta_{k+1} = theta_k - a_k g_k with a_k = a/(k+1+A)^alpha,
    c_k = c/(k+1)^gamma, and g_k estimated from one Rademacher
    perturbation pair per iteration."""
    theta = np.asarray(theta0, dtype=float).copy()
    p = theta.size
    rng = np.random.default_rng(cfg.seed)
    n_iter = (cfg.max_evaluations - cfg.calibration_evaluations) // 2
    A = cfg.stability if cfg.stability is not None else 0.01 * max(n_iter, 1)

    trace = BOTrace(kernel_kind="spsa", seed=cfg.seed)
    t0 = time.perf_counter()
    best = np.inf
    ys: list[float] = []

    def record(th, val):
        nonlocal best
        best = min(best, val)
        ys.append(val)
        err = None if e_opt is None else best_seen_energy_error(ys, e_opt)
        trace.records.append(BORecord(len(ys) - 1, th.copy(), val, best, err,
                                      {}, time.perf_counter() - t0))
        trace.evaluator_calls += 1

    # calibration: estimate the typical gradient magnitude at theta0
    grad_mags = []
    for _ in range(cfg.calibration_evaluations // 2):
        delta = rng.choice([-1.0, 1.0], size=p)
        tp, tm = theta + cfg.c * delta, theta - cfg.c * delta
        yp, ym = float(evaluator(tp)), float(evaluator(tm))
        record(tp, yp)
        record(tm, ym)
        grad_mags.append(np.mean(np.abs((yp - ym) / (2.0 * cfg.c * delta))))
    a = cfg.a
    if a is None:
        avg = float(np.mean(grad_mags))
        a = TARGET_FIRST_STEP * (A + 1.0) ** cfg.alpha_gain / max(avg, 1e-12)

    for k in range(n_iter):
        a_k = a / (k + 1.0 + A) ** cfg.alpha_gain
        c_k = cfg.c / (k + 1.0) ** cfg.gamma
        delta = rng.choice([-1.0, 1.0], size=p)
        tp, tm = theta + c_k * delta, theta - c_k * delta
        yp, ym = float(evaluator(tp)), float(evaluator(tm))
        record(tp, yp)
        record(tm, ym)
        ghat = (yp - ym) / (2.0 * c_k * delta)
        theta = theta - a_k * ghat
    trace.final_theta = theta
    return trace


def trailing_mean_error(trace: BOTrace, e_opt: float, window: int = 25) -> float:
    """Relative error of the mean energy over the trace's last evaluations."""
    tail = trace.y[-window:]
    return (float(np.mean(tail)) - e_opt) / abs(e_opt)
