"""Bayesian-optimization loop: expected improvement, acquisition search,
and trace recording.

The loop minimizes an energy evaluator over the box [-pi, pi]^p.  After
``n_init`` uniform random evaluations, each query refits the GP (with
marginal-likelihood hyperparameter optimization on a configurable cadence),
maximizes expected improvement by multi-start L-BFGS-B, and evaluates the
proposal.  For quantum kernels the base Gram matrix grows one row per query
and previously seen pairs are never recomputed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from . import gp
from .errors import ConfigError, UndefinedMetricError
from .kernels import CLASSICAL_KINDS, KernelEngine, KernelSpec

FD_STEP = 1e-6


@dataclass
class BOConfig:
    n_init: int = 25
    n_queries: int = 80
    xi: float = 0.01
    restarts: int = 20
    hyperopt_every: int = 1
    optimize_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 1 or self.n_queries < 0 or self.xi < 0:
            raise ConfigError("need n_init >= 1, n_queries >= 0, xi >= 0")


@dataclass
class BORecord:
    iteration: int
    theta: np.ndarray
    y: float
    best: float
    error: float | None
    hypers: dict
    wall_time: float


@dataclass
class BOTrace:
    kernel_kind: str
    seed: int
    records: list[BORecord] = field(default_factory=list)
    evaluator_calls: int = 0
    final_theta: np.ndarray | None = None

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def best_seen(self) -> np.ndarray:
        return np.array([r.best for r in self.records])


def _ei_values(mu: np.ndarray, var: np.ndarray, y_best: float,
               xi: float) -> np.ndarray:
    """Expected improvement for minimization; the zero-variance limit is the
    certain improvement max(y_best - mu + xi, 0)."""
    imp = y_best - mu + xi
    sd = np.sqrt(np.clip(var, 0.0, None))
    out = np.maximum(imp, 0.0)
    pos = sd > 0.0
    z = imp[pos] / sd[pos]
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    out[pos] = imp[pos] * ndtr(z) + sd[pos] * phi
    return out


def expected_improvement(model: gp.GPModel, x: np.ndarray, y_best: float,
                         xi: float) -> float:
    mu, var = gp.predict_batch(model, np.asarray(x, float)[None, :])
    return float(_ei_values(mu, var, y_best, xi)[0])


def _neg_ei_and_grad(x: np.ndarray, model: gp.GPModel, y_best: float,
                     xi: float) -> tuple[float, np.ndarray]:
    """Central finite differences of EI through one batched posterior call.

    The stencil's features come from the engine's finite-difference fast
    path (prefix/suffix products for quantum kernels).
    """
    p = x.size
    batch = np.tile(x, (2 * p + 1, 1))
    for i in range(p):
        batch[1 + 2 * i, i] += FD_STEP
        batch[2 + 2 * i, i] -= FD_STEP
    # statevector stencils are as cheap batched as via prefix/suffix reuse;
    # operator-valued features are not
    fstar = model.engine.featurize_fd(x, FD_STEP) \
        if model.kernel.kind == "unitary" else None
    mu, var = gp.predict_batch(model, batch, fstar=fstar)
    ei = _ei_values(mu, var, y_best, xi)
    grad = (ei[1::2] - ei[2::2]) / (2.0 * FD_STEP)
    return -ei[0], -grad


def propose(model: gp.GPModel, cfg: BOConfig, rng: np.random.Generator,
            x_best: np.ndarray) -> np.ndarray:
    """Maximize EI over the box by multi-start L-BFGS-B: uniform random
    starts plus the best observed point.  The highest-EI optimum wins even
    when every restart lands at EI = 0 (search never halts)."""
    p = model.X.shape[1]
    y_best = float(np.min(model.y))
    starts = [np.asarray(x_best, float)]
    starts += list(rng.uniform(-np.pi, np.pi, size=(cfg.restarts, p)))
    best_x, best_val = None, -np.inf
    for s in starts:
        res = minimize(_neg_ei_and_grad, s, args=(model, y_best, cfg.xi),
                       jac=True, method="L-BFGS-B",
                       bounds=[(-np.pi, np.pi)] * p,
                       options={"maxiter": 100})
        val = -res.fun
        if val > best_val:
            best_val, best_x = val, np.clip(res.x, -np.pi, np.pi)
    return best_x


def best_seen_energy_error(y, e_opt: float) -> float:
    """(min y - E_opt) / |E_opt|."""
    if e_opt == 0.0:
        raise UndefinedMetricError("reference energy of zero leaves the error undefined")
    return (float(np.min(y)) - e_opt) / abs(e_opt)


def _hypers_dict(kernel: KernelSpec) -> dict:
    out = {"signal_variance": kernel.signal_variance,
           "noise_variance": kernel.noise_variance}
    if kernel.kind in CLASSICAL_KINDS:
        out["lengthscale"] = kernel.lengthscale
        if kernel.kind == "rq":
            out["alpha"] = kernel.alpha
    return out


def _append_features(kind, feats, fnew):
    if isinstance(feats, list):
        return feats + list(fnew)
    return np.vstack([feats, fnew])


def run_bo(evaluator, kernel: KernelSpec, cfg: BOConfig, p: int,
           e_opt: float | None = None, mean: float = 0.0) -> BOTrace:
    """Full BO run; deterministic under a fixed cfg.seed.

    ``evaluator`` maps an angle vector to an energy; ``p`` is the parameter
    count.  Returns the per-evaluation trace (initializers included).
    """
    rng = np.random.default_rng(cfg.seed)
    trace = BOTrace(kernel_kind=kernel.kind, seed=cfg.seed)
    t0 = time.perf_counter()

    X = rng.uniform(-np.pi, np.pi, size=(cfg.n_init, p))
    y = np.array([float(evaluator(x)) for x in X])
    trace.evaluator_calls += cfg.n_init
    best = np.inf
    for i in range(cfg.n_init):
        best = min(best, y[i])
        err = None if e_opt is None else best_seen_energy_error(y[:i + 1], e_opt)
        trace.records.append(BORecord(i, X[i].copy(), y[i], best, err, {},
                                      time.perf_counter() - t0))

    quantum = kernel.kind not in CLASSICAL_KINDS
    engine = KernelEngine(kernel)
    feats = engine.featurize(X) if quantum else None
    G = engine.k_base(feats, feats) if quantum else None
    if G is not None:
        G = (G + G.T) / 2.0

    schedule = gp.HyperSchedule(optimize_noise=cfg.optimize_noise)
    for q in range(cfg.n_queries):
        model = gp.fit(kernel, X, y, mean, engine=engine, features=feats,
                       base_gram=G)
        if cfg.hyperopt_every and q % cfg.hyperopt_every == 0:
            model = gp.optimize_hypers(model, schedule)
            kernel = model.kernel  # warm start for the next iteration
        x_best = X[int(np.argmin(y))]
        x_new = propose(model, cfg, rng, x_best)
        y_new = float(evaluator(x_new))
        trace.evaluator_calls += 1

        if quantum:
            fnew = engine.featurize(x_new[None, :])
            col = engine.k_base(feats, fnew)  # only the new pairs
            G = np.block([[G, col], [col.T, np.ones((1, 1))]])
            feats = _append_features(kernel.kind, feats, fnew)
        X = np.vstack([X, x_new])
        y = np.append(y, y_new)
        best = min(best, y_new)
        err = None if e_opt is None else best_seen_energy_error(y, e_opt)
        trace.records.append(BORecord(cfg.n_init + q, x_new.copy(), y_new,
                                      best, err, _hypers_dict(kernel),
                                      time.perf_counter() - t0))
    return trace
