"""Kernel functions and Gram-matrix assembly.

Quantum kernels (state, unitary, and the MPS-approximated state kernel)
compare circuits through simulated overlaps; classical kernels (Matern 3/2,
Matern 5/2, RBF, rational quadratic) compare raw angle vectors through
Euclidean distance.  All kernels share the same scaling convention:

    K_ij = sigma^2 * k_base(x_i, x_j) + sigma_n^2 * delta_ij + jitter * delta_ij

with a fixed numerical jitter of 1e-10 on the diagonal.  Base kernels are
evaluated once per unordered pair; the :class:`KernelEngine` caches per-point
features (statevectors, unitaries, MPS states) so that Gram rows and
acquisition-time cross kernels are cheap batched products.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .circuit import Ansatz, simulate_batch, unitary_batch
from .errors import ConfigError, ShapeError

JITTER = 1e-10

QUANTUM_KINDS = ("state", "unitary", "mps_state")
CLASSICAL_KINDS = ("matern32", "matern52", "rbf", "rq")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus hyperparameters.

    Quantum kinds require ``ansatz`` (for ``mps_state`` the parameterized
    block) and ignore ``lengthscale``/``alpha``; classical kinds ignore
    ``ansatz``.  ``mps_input`` is the compressed input state for the
    MPS-approximated state kernel.
    """

    kind: str
    ansatz: Ansatz | None = None
    mps_input: object | None = None
    lengthscale: float = 1.0
    alpha: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.kind not in QUANTUM_KINDS + CLASSICAL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind in QUANTUM_KINDS and self.ansatz is None:
            raise ConfigError(f"kernel kind {self.kind!r} requires an ansatz")
        if self.kind == "mps_state" and self.mps_input is None:
            raise ConfigError("mps_state kernel requires the compressed input state")
        if self.kind in CLASSICAL_KINDS and self.lengthscale <= 0:
            raise ConfigError("lengthscale must be positive")
        if self.kind == "rq" and self.alpha <= 0:
            raise ConfigError("rq mixture parameter must be positive")
        if self.signal_variance <= 0:
            raise ConfigError("signal variance must be positive")
        if self.noise_variance < 0:
            raise ConfigError("noise variance must be nonnegative")

    def with_hypers(self, **kw) -> "KernelSpec":
        return replace(self, **kw)


def _base_classical(kind: str, d: np.ndarray, lengthscale: float,
                    alpha: float) -> np.ndarray:
    """Base kernel value from the Euclidean distance matrix ``d``."""
    l = lengthscale
    if kind == "rbf":
        return np.exp(-(d ** 2) / (2.0 * l ** 2))
    if kind == "matern32":
        u = np.sqrt(3.0) * d / l
        return (1.0 + u) * np.exp(-u)
    if kind == "matern52":
        u = np.sqrt(5.0) * d / l
        return (1.0 + u + u ** 2 / 3.0) * np.exp(-u)
    if kind == "rq":
        return (1.0 + d ** 2 / (2.0 * alpha * l ** 2)) ** (-alpha)
    raise ConfigError(f"not a classical kernel kind: {kind!r}")


def _base_classical_dl(kind: str, d: np.ndarray, lengthscale: float,
                       alpha: float) -> np.ndarray:
    """d k_base / d lengthscale, used for marginal-likelihood gradients."""
    l = lengthscale
    if kind == "rbf":
        return np.exp(-(d ** 2) / (2.0 * l ** 2)) * d ** 2 / l ** 3
    if kind == "matern32":
        u = np.sqrt(3.0) * d / l
        return np.exp(-u) * u ** 2 / l
    if kind == "matern52":
        u = np.sqrt(5.0) * d / l
        return np.exp(-u) * u ** 2 * (1.0 + u) / (3.0 * l)
    if kind == "rq":
        g = d ** 2 / (2.0 * alpha * l ** 2)
        return (1.0 + g) ** (-alpha - 1.0) * 2.0 * alpha * g / l
    raise ConfigError(f"not a classical kernel kind: {kind!r}")


def _base_classical_dalpha(d: np.ndarray, lengthscale: float,
                           alpha: float) -> np.ndarray:
    """d k_rq / d alpha."""
    g = d ** 2 / (2.0 * alpha * lengthscale ** 2)
    k = (1.0 + g) ** (-alpha)
    return k * (g / (1.0 + g) - np.log1p(g))


class KernelEngine:
    """Featurizer + batched base-kernel evaluator for one KernelSpec.

    Base-kernel values depend only on the kernel kind and the two inputs
    (never on sigma^2/sigma_n^2), so features can be cached and reused while
    hyperparameters move.  ``pair_evaluations`` counts base-kernel pair
    evaluations for instrumentation.
    """

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self.pair_evaluations = 0
        self._dense_gates = None  # lazy cache for the FD fast path

    def featurize(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        kind = self.spec.kind
        if kind == "state":
            return simulate_batch(self.spec.ansatz, X)
        if kind == "unitary":
            d = 1 << self.spec.ansatz.n
            U = unitary_batch(self.spec.ansatz, X)
            # scale so the squared feature overlap equals |Tr(U'^dag U)/d|^2
            return U.reshape(X.shape[0], d * d) / np.sqrt(d)
        if kind == "mps_state":
            from .mps import apply_block
            return [apply_block(self.spec.mps_input, self.spec.ansatz, th)
                    for th in X]
        return X

    def _dense_program(self):
        """Per-gate dense embeddings of the ansatz, cached once.

        RY entries carry (param index, generator embedding M_q) so that
        RY(theta) = cos(theta/2) I + sin(theta/2) M_q without rebuilding the
        matrix; fixed gates are embedded outright.
        """
        if self._dense_gates is None:
            from .circuit import CXGate, RYGate
            from .features import embed_gate
            a = self.spec.ansatz
            miy = np.array([[0.0, -1.0], [1.0, 0.0]])  # -i Y, the RY generator
            cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                           [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
            entries = []
            for g in a.program:
                if isinstance(g, RYGate):
                    entries.append(("ry", g.param, embed_gate(a.n, (g.qubit,), miy)))
                elif isinstance(g, CXGate):
                    entries.append(("fixed", None,
                                    embed_gate(a.n, (g.control, g.target), cx)))
                else:
                    entries.append(("fixed", None,
                                    embed_gate(a.n, g.qubits, g.matrix)))
            self._dense_gates = entries
        return self._dense_gates

    def featurize_fd(self, x: np.ndarray, step: float) -> np.ndarray:
        """Features of the finite-difference stencil around one point,
        ordered [x, x+step*e_0, x-step*e_0, x+step*e_1, ...].

        For the quantum kernels a single perturbed angle only swaps one
        rotation, so the stencil is assembled from cached prefix states (or
        operators) and suffix operator products instead of 2p+1 full
        simulations.
        """
        x = np.asarray(x, dtype=float).ravel()
        p = x.size
        kind = self.spec.kind
        if kind not in ("state", "unitary") or self.spec.ansatz.n > 8:
            batch = np.tile(x, (2 * p + 1, 1))
            for i in range(p):
                batch[1 + 2 * i, i] += step
                batch[2 + 2 * i, i] -= step
            return self.featurize(batch)

        a = self.spec.ansatz
        dim = 1 << a.n
        gates = self._dense_program()
        c = np.cos(x / 2.0)
        s = np.sin(x / 2.0)
        # prefix pass: state (or operator) just before each rotation
        if kind == "state":
            cur = np.zeros(dim, dtype=complex)
            cur[0] = 1.0
        else:
            cur = np.eye(dim, dtype=complex)
        prefixes = [None] * p
        for tag, param, M in gates:
            if tag == "ry":
                prefixes[param] = cur
                cur = c[param] * cur + s[param] * (M @ cur)
            else:
                cur = M @ cur
        base = cur
        # suffix pass: operator product of everything after each rotation
        suffixes = [None] * p
        S = np.eye(dim, dtype=complex)
        for tag, param, M in reversed(gates):
            if tag == "ry":
                suffixes[param] = S
                S = S @ (c[param] * np.eye(dim) + s[param] * M)
            else:
                S = S @ M

        out = np.empty((2 * p + 1, dim * dim if kind == "unitary" else dim),
                       dtype=complex)
        scale = 1.0 / np.sqrt(dim) if kind == "unitary" else 1.0
        out[0] = base.ravel() * scale
        for i in range(p):
            cp, sp = np.cos((x[i] + step) / 2.0), np.sin((x[i] + step) / 2.0)
            cm, sm = np.cos((x[i] - step) / 2.0), np.sin((x[i] - step) / 2.0)
            rotated = self._rot_apply(prefixes[i], gates, i)
            Mpre = rotated  # (M @ prefix) computed once per coordinate
            out[1 + 2 * i] = (suffixes[i]
                              @ (cp * prefixes[i] + sp * Mpre)).ravel() * scale
            out[2 + 2 * i] = (suffixes[i]
                              @ (cm * prefixes[i] + sm * Mpre)).ravel() * scale
        return out

    def _rot_apply(self, prefix, gates, param):
        for tag, pidx, M in gates:
            if tag == "ry" and pidx == param:
                return M @ prefix
        raise ConfigError("rotation index missing from the gate program")

    def k_base(self, feats_a, feats_b) -> np.ndarray:
        """Base-kernel matrix between two feature batches, shape (A, B)."""
        kind = self.spec.kind
        if kind in ("state", "unitary"):
            overlap = feats_a @ feats_b.conj().T
            out = np.abs(overlap) ** 2
        elif kind == "mps_state":
            from .mps import overlap as mps_overlap
            out = np.empty((len(feats_a), len(feats_b)))
            for i, fa in enumerate(feats_a):
                for j, fb in enumerate(feats_b):
                    out[i, j] = abs(mps_overlap(fa, fb)) ** 2
        else:
            d = cdist(feats_a, feats_b)
            out = _base_classical(kind, d, self.spec.lengthscale, self.spec.alpha)
        self.pair_evaluations += out.size
        return out

    def k_base_diag(self, feats) -> np.ndarray:
        """k_base(x, x); equals 1 for every kernel kind used here."""
        m = len(feats)
        return np.ones(m)


def classical_kernel(spec: KernelSpec, x: np.ndarray, xp: np.ndarray) -> float:
    """Base classical kernel value (excludes sigma^2 and sigma_n^2)."""
    if spec.kind not in CLASSICAL_KINDS:
        raise ConfigError(f"{spec.kind!r} is not a classical kernel")
    d = float(np.linalg.norm(np.asarray(x, float) - np.asarray(xp, float)))
    return float(_base_classical(spec.kind, np.array(d), spec.lengthscale,
                                 spec.alpha))


def state_kernel(a: Ansatz, x: np.ndarray, xp: np.ndarray) -> float:
    """k_s = |<psi(x')|psi(x)>|^2."""
    states = simulate_batch(a, np.stack([np.asarray(x, float),
                                         np.asarray(xp, float)]))
    return float(np.abs(np.vdot(states[1], states[0])) ** 2)


def unitary_kernel(a: Ansatz, x: np.ndarray, xp: np.ndarray) -> float:
    """k_u = |Tr(U(x')^dag U(x)) / 2^n|^2."""
    d = 1 << a.n
    U = unitary_batch(a, np.stack([np.asarray(x, float), np.asarray(xp, float)]))
    tr = np.trace(U[1].conj().T @ U[0])
    return float(np.abs(tr / d) ** 2)


def _kernel_value(spec: KernelSpec, x, xp) -> float:
    if spec.kind == "state":
        return state_kernel(spec.ansatz, x, xp)
    if spec.kind == "unitary":
        return unitary_kernel(spec.ansatz, x, xp)
    if spec.kind == "mps_state":
        from .mps import approx_state_kernel
        return approx_state_kernel(spec.mps_input, spec.ansatz, x, xp)
    return classical_kernel(spec, x, xp)


def gram(spec: KernelSpec, X: np.ndarray, engine: KernelEngine | None = None,
         features=None) -> np.ndarray:
    """sigma^2-scaled Gram matrix with noise and jitter on the diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ShapeError("gram requires at least one point")
    engine = engine or KernelEngine(spec)
    if features is None:
        features = engine.featurize(X)
    K0 = engine.k_base(features, features)
    K0 = (K0 + K0.T) / 2.0
    m = K0.shape[0]
    return spec.signal_variance * K0 + (spec.noise_variance + JITTER) * np.eye(m)


def cross_kernel(spec: KernelSpec, X: np.ndarray, xstar: np.ndarray,
                 engine: KernelEngine | None = None, features=None) -> np.ndarray:
    """sigma^2 * k_base(x*, x_i); no noise term."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    engine = engine or KernelEngine(spec)
    if features is None:
        features = engine.featurize(X)
    fstar = engine.featurize(np.asarray(xstar, float)[None, :])
    return spec.signal_variance * engine.k_base(features, fstar)[:, 0]
