"""Gaussian-process regression on kernel Gram matrices.

A fitted model holds the Cholesky factor of K = sigma^2 K0 + sigma_n^2 I
(plus numerical jitter) and the precomputed solve alpha = K^{-1}(y - mu).
Hyperparameters are optimized by maximizing the log marginal likelihood in
log-space with analytic gradients; for quantum kernels the base Gram K0 is
fixed, so the likelihood factors through its eigendecomposition and each
(sigma^2, sigma_n^2) step costs O(m) instead of O(m^3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import ConditioningError, ConfigError, ShapeError, UndefinedMetricError
from .kernels import (CLASSICAL_KINDS, JITTER, KernelEngine, KernelSpec,
                      _base_classical, _base_classical_dalpha, _base_classical_dl)

MAX_JITTER = 1e-4

LOG_BOUNDS = {
    "signal_variance": (np.log(1e-12), np.log(1e3)),
    "noise_variance": (np.log(1e-12), np.log(1e3)),
    "lengthscale": (np.log(1e-3), np.log(1e3)),
    "alpha": (np.log(1e-3), np.log(1e5)),
}


@dataclass
class Posterior:
    """Predictive mean and (clipped-nonnegative) variance at one point."""

    mean: float
    variance: float


@dataclass
class HyperSchedule:
    """Settings for marginal-likelihood hyperparameter optimization."""

    optimize_noise: bool = True
    restarts: int = 3
    maxiter: int = 200
    seed: int = 0


@dataclass
class GPModel:
    """Immutable fitted GP; create via :func:`fit`."""

    kernel: KernelSpec
    X: np.ndarray
    y: np.ndarray
    mean: float
    engine: KernelEngine
    features: object
    base_gram: np.ndarray
    chol: np.ndarray
    alpha_vec: np.ndarray
    jitter: float
    dist: np.ndarray | None = None
    warn_diverged: bool = False
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.X.shape[0]


def _chol_with_escalation(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter x10 up to 1e-4."""
    jitter = JITTER
    while True:
        try:
            return np.linalg.cholesky(K + (jitter - JITTER) * np.eye(K.shape[0])), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > MAX_JITTER:
                raise ConditioningError(
                    "Gram matrix not positive definite after jitter escalation")


def fit(kernel: KernelSpec, X: np.ndarray, y: np.ndarray, mean: float = 0.0,
        engine: KernelEngine | None = None, features=None,
        base_gram: np.ndarray | None = None) -> GPModel:
    """Assemble the Gram matrix, factorize, and precompute the target solve.

    ``features`` and ``base_gram`` allow reuse of cached featurizations and
    previously assembled base Gram blocks (the base kernel is independent of
    sigma^2/sigma_n^2, so hyperparameter moves never recompute it).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size or y.size < 1:
        raise ShapeError("need equally many inputs and targets, at least one")
    engine = engine or KernelEngine(kernel)
    if features is None:
        features = engine.featurize(X)
    dist = None
    if kernel.kind in CLASSICAL_KINDS:
        dist = cdist(X, X)
    if base_gram is None:
        if dist is not None:
            base_gram = _base_classical(kernel.kind, dist, kernel.lengthscale,
                                        kernel.alpha)
            engine.pair_evaluations += base_gram.size
        else:
            base_gram = engine.k_base(features, features)
        base_gram = (base_gram + base_gram.T) / 2.0
    m = y.size
    K = kernel.signal_variance * base_gram \
        + (kernel.noise_variance + JITTER) * np.eye(m)
    L, jitter = _chol_with_escalation(K)
    resid = y - mean
    alpha_vec = cho_solve((L, True), resid)
    return GPModel(kernel=kernel, X=X, y=y, mean=mean, engine=engine,
                   features=features, base_gram=base_gram, chol=L,
                   alpha_vec=alpha_vec, jitter=jitter, dist=dist)


def _cross_base(model: GPModel, Xstar: np.ndarray, fstar=None):
    """Base kernel block k0(x_i, x*_j) plus the new points' features."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    if fstar is None:
        fstar = model.engine.featurize(Xstar)
    if model.dist is not None:
        d = cdist(model.X, Xstar)
        k0 = _base_classical(model.kernel.kind, d, model.kernel.lengthscale,
                             model.kernel.alpha)
        model.engine.pair_evaluations += k0.size
    else:
        k0 = model.engine.k_base(model.features, fstar)
    return k0, fstar


def predict_batch(model: GPModel, Xstar: np.ndarray,
                  fstar=None) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at a batch of points; ``fstar`` may
    supply precomputed features for the batch."""
    k0, _ = _cross_base(model, Xstar, fstar)
    k = model.kernel.signal_variance * k0
    mu = model.mean + k.T @ model.alpha_vec
    v = solve_triangular(model.chol, k, lower=True)
    prior = model.kernel.signal_variance  # k_base(x*, x*) = 1 for all kinds
    var = np.clip(prior - np.sum(v * v, axis=0), 0.0, None)
    return mu, var


def predict(model: GPModel, xstar: np.ndarray) -> Posterior:
    mu, var = predict_batch(model, np.asarray(xstar, float)[None, :])
    return Posterior(mean=float(mu[0]), variance=float(var[0]))


def log_marginal_likelihood(model: GPModel) -> float:
    """-1/2 (y-mu)^T K^{-1} (y-mu) - 1/2 log det K - (m/2) log 2 pi."""
    resid = model.y - model.mean
    quad = float(resid @ model.alpha_vec)
    logdet = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * quad - 0.5 * logdet - 0.5 * model.m * np.log(2.0 * np.pi)


def _free_hypers(kernel: KernelSpec, optimize_noise: bool) -> list[str]:
    names = ["signal_variance"]
    if optimize_noise:
        names.append("noise_variance")
    if kernel.kind in CLASSICAL_KINDS:
        names.append("lengthscale")
        if kernel.kind == "rq":
            names.append("alpha")
    return names


def _dK(model: GPModel, name: str) -> np.ndarray:
    k = model.kernel
    if name == "signal_variance":
        return model.base_gram
    if name == "noise_variance":
        return np.eye(model.m)
    if k.kind not in CLASSICAL_KINDS:
        raise ConfigError(f"{name!r} is not a hyperparameter of a {k.kind} kernel")
    if name == "lengthscale":
        return k.signal_variance * _base_classical_dl(k.kind, model.dist,
                                                      k.lengthscale, k.alpha)
    if name == "alpha":
        if k.kind != "rq":
            raise ConfigError("mixture parameter applies to the rq kernel only")
        return k.signal_variance * _base_classical_dalpha(model.dist,
                                                          k.lengthscale, k.alpha)
    raise ConfigError(f"unknown hyperparameter {name!r}")


def lml_gradient(model: GPModel, wrt: str) -> float:
    """1/2 Tr[(beta beta^T - K^{-1}) dK/dh] with analytic dK entries."""
    dK = _dK(model, wrt)
    Kinv = cho_solve((model.chol, True), np.eye(model.m))
    beta = model.alpha_vec
    M = np.outer(beta, beta) - Kinv
    return 0.5 * float(np.sum(M * dK))


def closed_form_signal_variance(base_gram: np.ndarray, y: np.ndarray,
                                mean: float) -> float:
    """Noiseless maximum-likelihood signal variance (y-mu)^T K0^{-1} (y-mu)/m."""
    resid = np.asarray(y, float).ravel() - mean
    m = resid.size
    K0 = base_gram + JITTER * np.eye(m)
    try:
        c = cho_factor(K0, lower=True)
        quad = float(resid @ cho_solve(c, resid))
    except np.linalg.LinAlgError:
        quad = float(resid @ np.linalg.lstsq(K0, resid, rcond=None)[0])
    return max(quad / m, 1e-12)


def _eig_nll(log_th: np.ndarray, w: np.ndarray, yt: np.ndarray,
             optimize_noise: bool):
    """Negative LML and gradient in the base-Gram eigenbasis.

    K0 is fixed, so K's eigenvalues are sigma^2 w_i + sigma_n^2 + jitter and
    every evaluation is O(m).
    """
    s2 = np.exp(log_th[0])
    sn2 = np.exp(log_th[1]) if optimize_noise else 0.0
    lam = s2 * w + sn2 + JITTER
    quad = yt * yt / lam
    nll = 0.5 * float(np.sum(quad) + np.sum(np.log(lam))
                      + yt.size * np.log(2.0 * np.pi))
    # d nll / d lam_i = -y_i^2/(2 lam^2) + 1/(2 lam)
    dlam = 0.5 * (1.0 / lam - quad / lam)
    g = [float(np.sum(dlam * w)) * s2]
    if optimize_noise:
        g.append(float(np.sum(dlam)) * sn2)
    return nll, np.array(g)


def _generic_nll(log_th: np.ndarray, names: list[str], model: GPModel):
    """Negative LML and gradient via a full refit; used for classical kernels
    whose base Gram moves with the lengthscale."""
    kern = model.kernel.with_hypers(**{n: float(np.exp(v))
                                       for n, v in zip(names, log_th)})
    try:
        m2 = fit(kern, model.X, model.y, model.mean, engine=model.engine,
                 features=model.features)
    except ConditioningError:
        return 1e12, np.zeros(len(names))
    nll = -log_marginal_likelihood(m2)
    grad = np.array([-lml_gradient(m2, n) * np.exp(v)
                     for n, v in zip(names, log_th)])
    return nll, grad


def optimize_hypers(model: GPModel, schedule: HyperSchedule | None = None) -> GPModel:
    """Maximize the log marginal likelihood over the kernel's free
    hyperparameters (log-space L-BFGS-B with restarts); returns a refitted
    model.  Quantum kernels keep their base Gram fixed and optimize only
    (sigma^2, sigma_n^2)."""
    schedule = schedule or HyperSchedule()
    names = _free_hypers(model.kernel, schedule.optimize_noise)
    s2_init = closed_form_signal_variance(model.base_gram, model.y, model.mean)
    init = {"signal_variance": s2_init, "noise_variance": 1e-4 * s2_init,
            "lengthscale": model.kernel.lengthscale, "alpha": model.kernel.alpha}
    x0 = np.log([init[n] for n in names])
    bounds = [LOG_BOUNDS[n] for n in names]
    x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
    quantum = model.kernel.kind not in CLASSICAL_KINDS
    if quantum:
        w, V = np.linalg.eigh(model.base_gram)
        w = np.clip(w, 0.0, None)
        yt = V.T @ (model.y - model.mean)
        objective = lambda th: _eig_nll(th, w, yt, schedule.optimize_noise)
    else:
        objective = lambda th: _generic_nll(th, names, model)

    rng = np.random.default_rng(schedule.seed)
    best_x, best_val = None, np.inf
    any_converged = False
    for r in range(max(1, schedule.restarts)):
        start = x0 if r == 0 else np.clip(x0 + rng.normal(0.0, 1.0, x0.size),
                                          [b[0] for b in bounds],
                                          [b[1] for b in bounds])
        res = minimize(objective, start, jac=True, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": schedule.maxiter})
        if np.isfinite(res.fun):
            any_converged = any_converged or res.success
            if res.fun < best_val:
                best_val, best_x = res.fun, res.x
    if best_x is None:
        best_x = x0
    new_kernel = model.kernel.with_hypers(
        **{n: float(np.exp(v)) for n, v in zip(names, best_x)})
    keep_gram = model.base_gram if quantum else None
    out = fit(new_kernel, model.X, model.y, model.mean, engine=model.engine,
              features=model.features, base_gram=keep_gram)
    out.warn_diverged = not any_converged
    return out


def validation_score(model: GPModel, X_v: np.ndarray, y_v: np.ndarray) -> float:
    """R^2 against held-out targets: 1 - sum(y - yhat)^2 / sum(y - mean_y)^2.

    A perfect predictor scores 1; always predicting the validation mean
    scores 0.  Zero-variance targets leave the score undefined.
    """
    X_v = np.atleast_2d(np.asarray(X_v, dtype=float))
    y_v = np.asarray(y_v, dtype=float).ravel()
    if y_v.size < 2:
        raise ShapeError("validation needs at least two points")
    denom = float(np.sum((y_v - y_v.mean()) ** 2))
    if denom == 0.0:
        raise UndefinedMetricError("validation targets have zero variance")
    mu, _ = predict_batch(model, X_v)
    return 1.0 - float(np.sum((y_v - mu) ** 2)) / denom


def log_bayes_factor(model_a: GPModel, model_b: GPModel) -> float:
    """LML(A) - LML(B) for two models fitted on identical data."""
    if model_a.X.shape != model_b.X.shape \
            or not np.array_equal(model_a.X, model_b.X) \
            or not np.array_equal(model_a.y, model_b.y):
        raise ConfigError("Bayes factors require identical training data")
    return log_marginal_likelihood(model_a) - log_marginal_likelihood(model_b)
