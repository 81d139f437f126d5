"""Explicit feature maps for the state and unitary kernels.

Both quantum kernels factor into an angle-dependent Fourier vector v(theta)
of length 3^p and an ansatz-dependent Gram matrix of operator overlaps:

    k_state(theta, theta')   = v(theta')^T S v(theta)
    k_unitary(theta, theta') = v(theta')^T T v(theta)
    E(theta)                 = h^T v(theta)

The Kronecker ordering is fixed with the last parameter's (1, sin, cos)
triple varying slowest, and is shared between :func:`fourier_vector` and the
operator constructions below.  Dimension bounds for the induced feature
spaces are provided as closed-form/recursive formulas alongside numerical
rank helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import pauli
from .circuit import Ansatz, CXGate, FixedGate, RYGate, simulate_batch
from .errors import CapacityError, ConfigError

FOURIER_P_CAP = 12

_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
               dtype=complex)


def fourier_vector(theta: np.ndarray, cap: int = FOURIER_P_CAP) -> np.ndarray:
    """Kronecker product of (1, sin(theta_q), cos(theta_q)) triples.

    The triple of the last angle varies slowest (is the leftmost factor).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    p = theta.size
    if p > cap:
        raise CapacityError(f"fourier_vector capped at p={cap} (3^p memory)")
    v = np.ones(1)
    for t in theta:  # q = 1 first, so earlier angles vary fastest
        v = np.kron(np.array([1.0, np.sin(t), np.cos(t)]), v)
    return v


def embed_gate(n: int, qubits: tuple[int, ...], mat: np.ndarray) -> np.ndarray:
    """Dense 2^n x 2^n embedding of a 1- or 2-qubit gate."""
    dim = 1 << n
    state = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * n)
    from .circuit import _apply_fixed_batch
    state = _apply_fixed_batch(state, n, FixedGate(qubits, mat))
    # rows are U|j>, so transpose to get columns U|j>
    return state.reshape(dim, dim).T


def _ppr_sequence(a: Ansatz):
    """Decompose the program into (P_q, R_q) pairs plus the trailing unitary.

    Fixed gates between rotations are composed into a single interleaving
    unitary; parameter indices must be in program order (0, 1, ..., p-1).
    """
    dim = 1 << a.n
    rotations: list[tuple[np.ndarray, np.ndarray]] = []
    pending = np.eye(dim, dtype=complex)
    expected = 0
    for g in a.program:
        if isinstance(g, RYGate):
            if g.param != expected:
                raise ConfigError("parameter indices must follow program order")
            expected += 1
            P = embed_gate(a.n, (g.qubit,), _Y)
            rotations.append((P, pending))
            pending = np.eye(dim, dtype=complex)
        elif isinstance(g, CXGate):
            pending = embed_gate(a.n, (g.control, g.target), _CX) @ pending
        else:
            pending = embed_gate(a.n, g.qubits, g.matrix) @ pending
    return rotations, pending


def _check_capacity(n: int, p: int, superops: bool) -> None:
    entries = 3 ** p * (16 ** n if superops else 4 ** n)
    if entries > 1 << 25:
        raise CapacityError(
            f"feature construction for n={n}, p={p} exceeds the memory cap")


def build_operator_vector_states(a: Ansatz) -> np.ndarray:
    """The 3^p Hermitian operators obtained by applying the feature-map
    operator vector to |0><0|, returned as a (3^p, 2^n, 2^n) array.

    Entry triples per parameter are the commutant/anticommutant split of the
    rotated input with respect to that rotation's Pauli axis; ordering matches
    :func:`fourier_vector`.  The trailing fixed unitary is excluded (it
    cancels in both kernel Gram matrices).
    """
    _check_capacity(a.n, a.p, superops=False)
    rotations, _ = _ppr_sequence(a)
    dim = 1 << a.n
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    ops = rho0[None, :, :]
    for P, R in rotations:
        rotated = np.einsum("ij,bjk,lk->bil", R, ops, R.conj())
        conj = np.einsum("ij,bjk,lk->bil", P, rotated, P.conj())
        commuting = (rotated + conj) / 2.0
        anti = (rotated - conj) / 2.0
        middle = 1.0j * (np.einsum("bij,jk->bik", rotated, P)
                         - np.einsum("ij,bjk->bik", P, rotated)) / 2.0
        ops = np.concatenate([commuting, middle, anti], axis=0)
    return ops


def _superoperators(a: Ansatz) -> np.ndarray:
    """The full 3^p feature-map operators on H (x) H*, (3^p, 4^n, 4^n)."""
    _check_capacity(a.n, a.p, superops=True)
    rotations, _ = _ppr_sequence(a)
    dim2 = 1 << (2 * a.n)
    ops = np.eye(dim2, dtype=complex)[None, :, :]
    for P, R in rotations:
        RR = np.kron(R, R.conj())
        PP = np.kron(P, P.conj())
        eye = np.eye(dim2)
        plus = (eye + PP) @ RR / 2.0
        mid = 1.0j * (np.kron(np.eye(1 << a.n), P.conj())
                      - np.kron(P, np.eye(1 << a.n))) @ RR / 2.0
        minus = (eye - PP) @ RR / 2.0
        ops = np.concatenate([np.einsum("ij,bjk->bik", plus, ops),
                              np.einsum("ij,bjk->bik", mid, ops),
                              np.einsum("ij,bjk->bik", minus, ops)], axis=0)
    return ops


def _psd_factor(M: np.ndarray) -> np.ndarray:
    """Some Q with Q^dag Q = M, via eigen-decomposition with clipping.

    M is rank deficient by construction, so strict Cholesky is unusable;
    negative eigenvalues (float noise) are clipped at zero.
    """
    w, V = np.linalg.eigh((M + M.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    return (np.sqrt(w)[:, None] * V.conj().T)


@dataclass
class FeatureDecomposition:
    """Gram matrices and factors of the quantum kernels' feature maps."""

    S: np.ndarray | None = None
    T: np.ndarray | None = None
    Q: np.ndarray | None = None
    B: np.ndarray | None = None
    h: np.ndarray | None = None


def build_S(a: Ansatz) -> FeatureDecomposition:
    """State-kernel Gram matrix S_ij = <<rho0| s_i^dag s_j |rho0>> and a
    PSD-safe factor Q with Q^dag Q = S."""
    ops = build_operator_vector_states(a)
    W = ops.reshape(ops.shape[0], -1)
    S = W.conj() @ W.T
    S = (S + S.conj().T) / 2.0
    return FeatureDecomposition(S=S, Q=_psd_factor(S))


def build_T(a: Ansatz) -> FeatureDecomposition:
    """Unitary-kernel Gram matrix T_ij = Tr(s_i^dag s_j) / 4^n and a
    PSD-safe factor B with B^dag B = T."""
    sops = _superoperators(a)
    Z = sops.reshape(sops.shape[0], -1)
    T = Z.conj() @ Z.T / (4 ** a.n)
    T = (T + T.conj().T) / 2.0
    return FeatureDecomposition(T=T, B=_psd_factor(T))


def energy_weights(a: Ansatz, h: pauli.PauliSum) -> np.ndarray:
    """Weights h with E(theta) = h^T v(theta) for the given Hamiltonian."""
    ops = build_operator_vector_states(a)
    _, R_final = _ppr_sequence(a)
    H = dense_hamiltonian(h)
    A = R_final.conj().T @ H @ R_final
    w = np.einsum("ij,bij->b", A.conj(), ops)
    if np.max(np.abs(w.imag)) > 1e-9:
        raise ConfigError("energy weights have unexpected imaginary parts")
    return w.real


def dense_hamiltonian(h: pauli.PauliSum) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a PauliSum (small n only)."""
    if h.n > 12:
        raise CapacityError("dense Hamiltonian capped at 12 qubits")
    dim = 1 << h.n
    out = np.zeros((dim, dim), dtype=complex)
    basis = np.eye(dim, dtype=complex)
    for c, p in h.terms:
        out += c * pauli.apply_string(p, basis).T
    return out


def state_dim_bound(n: int, p: int) -> int:
    """Recursive upper bound on the state kernel's feature-space dimension."""
    if n < 1 or p < 0:
        raise ConfigError("need n >= 1 and p >= 0")
    d = 1
    half = 4 ** n // 2
    for _ in range(p):
        d = min(4 ** n, 3 * d, half + d)
    return d


def unitary_dim_bound(n: int, p: int) -> int:
    """Upper bound on the unitary kernel's feature-space dimension."""
    if n < 1 or p < 0:
        raise ConfigError("need n >= 1 and p >= 0")
    return min(4 ** (2 * n) - 2 * (4 ** n - 1), 3 ** p)


def real_ansatz_dim(n: int) -> int:
    """Number of real n-qubit Pauli operators (even count of Ys):
    sum_j 3^(n-2j) C(n, 2j)."""
    if n < 1:
        raise ConfigError("need n >= 1")
    return sum(3 ** (n - 2 * j) * comb(n, 2 * j) for j in range(n // 2 + 1))


def numerical_rank(M: np.ndarray, cutoff: float = 1e-8) -> int:
    """Rank at a relative singular-value cutoff."""
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > cutoff * s[0]))
