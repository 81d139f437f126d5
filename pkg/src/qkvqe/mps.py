"""Matrix-product-state engine.

States are chains of rank-3 tensors with axes (left bond, physical, right
bond); site 0 is the most significant bit of a dense basis index, matching
the qubit convention elsewhere in the package.  Two-qubit gates act on
adjacent sites only; applying one contracts the pair, splits it by SVD, and
optionally truncates to a bond cap with a local fidelity re-optimization of
the two modified tensors (alternating least squares, with the rest of the
chain canonicalized so environments are identities).

The approximated state kernel evaluates a parameterized block exactly (no
truncation) on copies of a compressed prefix state and returns the squared
overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Ansatz, CXGate, FixedGate, RYGate
from .errors import ConfigError, ShapeError, UnsupportedError

ALS_TOL = 1e-10
ALS_MAX_SWEEPS = 50

_CX_LEFT = np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                     [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CX_RIGHT = np.array([[1, 0, 0, 0], [0, 0, 0, 1],
                      [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0],
                  [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


class MPS:
    """Open-boundary matrix product state with mutable site tensors.

    Public module functions never mutate their arguments; they operate on
    clones.  The state is kept normalized (unit self-overlap) by every
    public operation.
    """

    def __init__(self, tensors):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise ShapeError("an MPS needs at least one site")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ShapeError("boundary bonds must have dimension 1")
        for i, t in enumerate(tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise ShapeError(f"site {i} tensor must be (chi_l, 2, chi_r)")
            if i and t.shape[0] != tensors[i - 1].shape[2]:
                raise ShapeError(f"bond mismatch between sites {i - 1} and {i}")
        self.tensors = tensors

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[2] for t in self.tensors[:-1])

    def clone(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors])

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    def _left_canonicalize_site(self, k: int) -> None:
        a, _, b = self.tensors[k].shape
        q, r = np.linalg.qr(self.tensors[k].reshape(a * 2, b))
        self.tensors[k] = q.reshape(a, 2, q.shape[1])
        self.tensors[k + 1] = np.einsum("rb,bpc->rpc", r, self.tensors[k + 1])

    def _right_canonicalize_site(self, k: int) -> None:
        a, _, b = self.tensors[k].shape
        q, r = np.linalg.qr(self.tensors[k].reshape(a, 2 * b).T)
        self.tensors[k] = q.T.reshape(q.shape[1], 2, b)
        self.tensors[k - 1] = np.einsum("apb,bl->apl", self.tensors[k - 1], r.T)

    def _canonicalize_block(self, i: int, j: int) -> None:
        """Make sites < i left-canonical and sites > j right-canonical."""
        for k in range(i):
            self._left_canonicalize_site(k)
        for k in range(self.n - 1, j, -1):
            self._right_canonicalize_site(k)

    def to_statevector(self, cap: int = 14) -> np.ndarray:
        if self.n > cap:
            raise ShapeError(f"dense conversion capped at {cap} sites")
        psi = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            psi = np.einsum("xa,apb->xpb", psi, t).reshape(-1, t.shape[2])
        return psi.ravel()

    def to_text(self) -> str:
        """Flat dump: `n bond_dims...` header, then one row-major tensor per
        line as alternating real/imaginary entries."""
        lines = [" ".join(map(str, (self.n, *self.bond_dims)))]
        for t in self.tensors:
            lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}"
                                  for z in t.ravel()))
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "MPS":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = [int(x) for x in lines[0].split()]
        n, bonds = head[0], head[1:]
        if len(bonds) != n - 1 or len(lines) != n + 1:
            raise ShapeError("malformed MPS dump")
        dims = [1] + bonds + [1]
        tensors = []
        for i in range(n):
            vals = np.array([float(x) for x in lines[i + 1].split()])
            t = vals[0::2] + 1j * vals[1::2]
            tensors.append(t.reshape(dims[i], 2, dims[i + 1]))
        return cls(tensors)


@dataclass
class TruncationReport:
    """Fidelity accounting for one two-qubit gate application."""

    site: int
    bond_dim: int
    truncated: bool
    svd_fidelity: float
    fidelity: float
    sweeps: int = 0


def product_state(n: int) -> MPS:
    """|0...0> with every bond dimension 1."""
    if n < 1:
        raise ShapeError("need at least one site")
    t = np.zeros((1, 2, 1), dtype=complex)
    t[0, 0, 0] = 1.0
    return MPS([t.copy() for _ in range(n)])


def overlap(a: MPS, b: MPS) -> complex:
    """<a|b> by left-to-right transfer-matrix contraction."""
    if a.n != b.n:
        raise ShapeError("site counts differ")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.einsum("ab,apc,bpd->cd", env, ta.conj(), tb)
    return complex(env[0, 0])


def apply_1q(m: MPS, gate: np.ndarray, site: int) -> MPS:
    """Contract a 2x2 unitary into one site tensor; bonds unchanged."""
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise ShapeError("one-qubit gate must be 2x2")
    out = m.clone()
    out.tensors[site] = np.einsum("ps,asb->apb", gate, out.tensors[site])
    return out


def _als_reoptimize(theta_mat: np.ndarray, A: np.ndarray, B: np.ndarray,
                    start_fidelity: float) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Alternating least-squares sweeps maximizing |<AB, theta>|^2 over the
    rank-chi factors, with identity environments (chain canonicalized).

    ``theta_mat`` is the normalized post-gate two-site matrix; A has
    orthonormal columns on entry.  Each half-sweep solves one factor in
    closed form against the orthonormalized other factor.
    """
    fid = start_fidelity
    sweeps = 0
    for sweeps in range(1, ALS_MAX_SWEEPS + 1):
        B = A.conj().T @ theta_mat
        q, _ = np.linalg.qr(B.T)
        B = q.T  # rows orthonormal
        A = theta_mat @ B.conj().T
        new_fid = float(np.linalg.norm(A) ** 2)
        A, _ = np.linalg.qr(A)
        if abs(new_fid - fid) <= ALS_TOL * max(fid, 1e-300):
            fid = new_fid
            break
        fid = new_fid
    B = A.conj().T @ theta_mat
    return A, B, fid, sweeps


def apply_2q(m: MPS, gate: np.ndarray, site: int, chi_max: int | None = None,
             reoptimize: bool = True) -> tuple[MPS, TruncationReport]:
    """Apply a 4x4 unitary to sites (site, site+1), site being the more
    significant qubit of the gate's basis ordering.

    The chain is canonicalized around the pair first, the pair contracted
    with the gate and split by SVD keeping at most ``chi_max`` singular
    values (all of them when None), and — if truncation discarded weight and
    ``reoptimize`` is set — the two new tensors are locally re-optimized
    against the untruncated pair state.
    """
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (4, 4):
        raise ShapeError("two-qubit gate must be 4x4")
    if site < 0 or site + 1 >= m.n:
        raise UnsupportedError("gate sites must be an adjacent in-range pair")
    out = m.clone()
    out._canonicalize_block(site, site + 1)
    A, B = out.tensors[site], out.tensors[site + 1]
    chi_l, chi_r = A.shape[0], B.shape[2]
    theta = np.einsum("asc,ctb->astb", A, B).reshape(chi_l, 4, chi_r)
    theta = np.einsum("pq,aqb->apb", gate, theta)
    theta_mat = theta.reshape(chi_l, 2, 2, chi_r).reshape(chi_l * 2, 2 * chi_r)
    tnorm = np.linalg.norm(theta_mat)
    theta_mat = theta_mat / tnorm
    U, s, Vh = np.linalg.svd(theta_mat, full_matrices=False)
    keep = len(s) if chi_max is None else min(len(s), chi_max)
    svd_fid = float(np.sum(s[:keep] ** 2))  # s already unit-normalized
    truncated = keep < len(s) and float(np.sum(s[keep:] ** 2)) > 1e-30
    sweeps = 0
    if truncated and reoptimize:
        A2 = U[:, :keep]
        B2 = np.diag(s[:keep]) @ Vh[:keep]
        A2, B2, fid, sweeps = _als_reoptimize(theta_mat, A2, B2, svd_fid)
    else:
        A2 = U[:, :keep]
        B2 = np.diag(s[:keep]) @ Vh[:keep]
        fid = svd_fid
    B2 = B2 / np.linalg.norm(B2)  # renormalize the truncated state
    out.tensors[site] = A2.reshape(chi_l, 2, keep)
    out.tensors[site + 1] = B2.reshape(keep, 2, chi_r)
    report = TruncationReport(site=site, bond_dim=keep, truncated=truncated,
                              svd_fidelity=svd_fid, fidelity=fid, sweeps=sweeps)
    return out, report


def _pair_gate(g, n: int) -> tuple[int, np.ndarray]:
    """Left site and 4x4 matrix (left qubit most significant) of a 2q gate."""
    if isinstance(g, CXGate):
        if g.target == g.control + 1:
            return g.control, _CX_LEFT
        if g.control == g.target + 1:
            return g.target, _CX_RIGHT
        raise UnsupportedError("non-adjacent CX gates are not routed")
    q0, q1 = g.qubits
    if q1 == q0 + 1:
        return q0, g.matrix
    if q0 == q1 + 1:
        return q1, _SWAP @ g.matrix @ _SWAP
    raise UnsupportedError("non-adjacent fixed gates are not routed")


@dataclass(frozen=True)
class BlockSplit:
    """Circuit partition U(theta) = U_B(theta_B) U_A(theta_A): a fixed-angle
    prefix followed by a parameterized nearest-neighbour block."""

    prefix: Ansatz
    prefix_angles: np.ndarray
    block: Ansatz

    def __post_init__(self):
        angles = np.asarray(self.prefix_angles, dtype=float)
        object.__setattr__(self, "prefix_angles", angles)
        if angles.shape != (self.prefix.p,):
            raise ShapeError("prefix angle count does not match its ansatz")
        if self.block.n != self.prefix.n:
            raise ShapeError("prefix and block act on different qubit counts")


def split_last_params(a: Ansatz, theta: np.ndarray, k: int) -> BlockSplit:
    """Split after the last gate touching parameters 0..p-k-1; the trailing
    block keeps the final ``k`` parameters (reindexed from zero)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (a.p,):
        raise ShapeError("angle count does not match the ansatz")
    if not 0 < k <= a.p:
        raise ConfigError("block parameter count out of range")
    cut = a.p - k
    start = 0
    for i, g in enumerate(a.program):
        if isinstance(g, RYGate) and g.param < cut:
            start = i + 1
    prefix = Ansatz(n=a.n, program=a.program[:start])
    block_prog = []
    for g in a.program[start:]:
        if isinstance(g, RYGate):
            if g.param < cut:
                raise ConfigError("prefix and block parameters interleave")
            block_prog.append(RYGate(g.qubit, g.param - cut))
        else:
            block_prog.append(g)
    return BlockSplit(prefix=prefix, prefix_angles=theta[:cut],
                      block=Ansatz(n=a.n, program=tuple(block_prog)))


def compress_prefix(split: BlockSplit, chi_max: int,
                    reports: list[TruncationReport] | None = None) -> MPS:
    """Run the fixed prefix on |0...0> under a bond cap, truncating with
    local re-optimization at every two-qubit gate."""
    m = product_state(split.prefix.n)
    for g in split.prefix.program:
        if isinstance(g, RYGate):
            m = apply_1q(m, ry_matrix(split.prefix_angles[g.param]), g.qubit)
        elif isinstance(g, FixedGate) and len(g.qubits) == 1:
            m = apply_1q(m, g.matrix, g.qubits[0])
        else:
            left, mat = _pair_gate(g, m.n)
            m, rep = apply_2q(m, mat, left, chi_max=chi_max, reoptimize=True)
            if reports is not None:
                reports.append(rep)
    return m


def apply_block(psi: MPS, block: Ansatz, theta: np.ndarray) -> MPS:
    """Apply a nearest-neighbour parameterized block exactly (no bond cap)."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape != (block.p,):
        raise ShapeError("angle count does not match the block")
    m = psi.clone()
    for g in block.program:
        if isinstance(g, RYGate):
            m = apply_1q(m, ry_matrix(theta[g.param]), g.qubit)
        elif isinstance(g, FixedGate) and len(g.qubits) == 1:
            m = apply_1q(m, g.matrix, g.qubits[0])
        else:
            left, mat = _pair_gate(g, m.n)
            m, _ = apply_2q(m, mat, left, chi_max=None, reoptimize=False)
    return m


def approx_state_kernel(psi: MPS, block: Ansatz, theta: np.ndarray,
                        theta_p: np.ndarray) -> float:
    """|<psi| U_B(theta')^dag U_B(theta) |psi>|^2 with exact block
    application on independent copies of the compressed prefix state."""
    a = apply_block(psi, block, theta)
    b = apply_block(psi, block, theta_p)
    return float(abs(overlap(b, a)) ** 2)
