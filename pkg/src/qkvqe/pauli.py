"""Pauli-string algebra and spin-chain Hamiltonians.

Operators are real-weighted sums of n-qubit Pauli strings.  Qubit 0 is the
leftmost character of a string and the most significant bit of a computational
basis index, so ``"ZZII"`` acts with Z on qubits 0 and 1 of a 4-qubit register.
Expectation values against statevectors are evaluated term-by-term without
ever materializing the operator as a dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSizeError, ShapeError

PAULI_CHARS = "IXYZ"


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli string, e.g. ``"XIZ"``."""

    ops: str

    def __post_init__(self):
        if not self.ops or any(c not in PAULI_CHARS for c in self.ops):
            raise ValueError(f"invalid Pauli string {self.ops!r}")

    @property
    def n(self) -> int:
        return len(self.ops)

    @property
    def is_identity(self) -> bool:
        return set(self.ops) == {"I"}

    def __str__(self) -> str:
        return self.ops


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings on a fixed qubit count.

    Duplicate strings are merged and exact-zero coefficients dropped at
    construction, so the term list is canonical.  Instances are immutable
    and safe to share between threads.
    """

    terms: tuple[tuple[float, PauliString], ...]
    n: int

    @classmethod
    def from_terms(cls, terms, n: int | None = None) -> "PauliSum":
        terms = [(float(c), p if isinstance(p, PauliString) else PauliString(p))
                 for c, p in terms]
        if n is None:
            if not terms:
                raise ValueError("qubit count required for an empty PauliSum")
            n = terms[0][1].n
        merged: dict[str, float] = {}
        for c, p in terms:
            if p.n != n:
                raise ShapeError(f"term {p} does not act on {n} qubits")
            merged[p.ops] = merged.get(p.ops, 0.0) + c
        kept = tuple((c, PauliString(ops)) for ops, c in merged.items() if c != 0.0)
        return cls(terms=kept, n=n)

    def __len__(self) -> int:
        return len(self.terms)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum.from_terms([(factor * c, p) for c, p in self.terms], n=self.n)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n != self.n:
            raise ShapeError("qubit counts differ")
        return PauliSum.from_terms(list(self.terms) + list(other.terms), n=self.n)

    def to_text(self) -> str:
        """Serialize as one `coeff pauli_string` line per term."""
        return "\n".join(f"{c!r} {p.ops}" for c, p in self.terms)

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "PauliSum":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            coeff, ops = line.split()
            terms.append((float(coeff), PauliString(ops)))
        return cls.from_terms(terms, n=n)


def build_tfim(n: int, J: float, hx: float, hz: float, periodic: bool = True) -> PauliSum:
    """Transverse-field Ising chain with a longitudinal field.

    H = J sum_<ij> Z_i Z_j + hx sum_i X_i + hz sum_i Z_i, with the coupling
    sum over nearest-neighbour edges of a chain (ring if ``periodic``).  The
    n=2 periodic ring has a single distinct edge.
    """
    if n < 2:
        raise InvalidSizeError("TFIM needs at least 2 qubits")
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        edges.append((n - 1, 0))
    terms = []
    for i, j in edges:
        ops = ["I"] * n
        ops[i] = "Z"
        ops[j] = "Z"
        terms.append((J, PauliString("".join(ops))))
    for i in range(n):
        ops = ["I"] * n
        ops[i] = "X"
        terms.append((hx, PauliString("".join(ops))))
        ops[i] = "Z"
        terms.append((hz, PauliString("".join(ops))))
    return PauliSum.from_terms(terms, n=n)


def _string_masks(p: PauliString) -> tuple[int, np.ndarray]:
    """Bit-flip mask and per-index phase of a Pauli string's action.

    P |i> = phase[i] |i ^ flip>, where bit q of an index corresponds to
    qubit q counted from the most significant bit.
    """
    n = p.n
    dim = 1 << n
    idx = np.arange(dim)
    flip = 0
    phase = np.ones(dim, dtype=complex)
    for q, op in enumerate(p.ops):
        mask = 1 << (n - 1 - q)
        bit = (idx & mask) != 0
        if op == "X":
            flip ^= mask
        elif op == "Y":
            flip ^= mask
            phase = phase * np.where(bit, -1j, 1j)
        elif op == "Z":
            phase = phase * np.where(bit, -1.0, 1.0)
    return flip, phase


def apply_string(p: PauliString, psi: np.ndarray) -> np.ndarray:
    """Return P |psi> for a single Pauli string (works on batched states)."""
    flip, phase = _string_masks(p)
    out = phase * psi
    if flip:
        idx = np.arange(out.shape[-1]) ^ flip
        out = out[..., idx]
    return out


def expectation(h: PauliSum, psi: np.ndarray) -> float:
    """Exact <psi|H|psi> evaluated term-by-term.

    The imaginary residue must stay below 1e-10; it is discarded.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (1 << h.n,):
        raise ShapeError(f"statevector has shape {psi.shape}, expected ({1 << h.n},)")
    total = 0.0 + 0.0j
    for c, p in h.terms:
        total += c * np.vdot(psi, apply_string(p, psi))
    if abs(total.imag) > 1e-10:
        raise ShapeError(f"expectation has imaginary residue {total.imag:.3e}")
    return float(total.real)


def expectation_batch(h: PauliSum, states: np.ndarray) -> np.ndarray:
    """<psi_b|H|psi_b> for a (B, 2^n) batch of statevectors."""
    states = np.asarray(states, dtype=complex)
    if states.shape[-1] != 1 << h.n:
        raise ShapeError("statevector dimension mismatch")
    vals = np.zeros(states.shape[0], dtype=complex)
    for c, p in h.terms:
        vals += c * np.einsum("bi,bi->b", states.conj(), apply_string(p, states))
    return vals.real


def trace_coefficient(h: PauliSum) -> float:
    """Tr H, i.e. 2^n times the identity-string coefficient."""
    for c, p in h.terms:
        if p.is_identity:
            return float(c * (1 << h.n))
    return 0.0


def shift_traceless(h: PauliSum) -> PauliSum:
    """Remove the identity component: H' = H - (Tr H / 2^n) I."""
    offset = trace_coefficient(h) / (1 << h.n)
    if offset == 0.0:
        return h
    return h + PauliSum.from_terms([(-offset, PauliString("I" * h.n))], n=h.n)
