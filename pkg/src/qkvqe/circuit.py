"""Parameterized ansatz circuits and dense statevector simulation.

An :class:`Ansatz` is an ordered program of fixed gates and parameterized
single-Pauli rotations (here RY gates).  Simulation is batched: a whole set
of angle vectors is propagated through the circuit at once, which is what
makes kernel Gram assembly and acquisition-function search cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pauli
from .errors import ConfigError, InvalidSizeError, ShapeError, UnsupportedError


@dataclass(frozen=True)
class RYGate:
    qubit: int
    param: int


@dataclass(frozen=True)
class CXGate:
    control: int
    target: int


@dataclass(frozen=True)
class FixedGate:
    """A fixed dense unitary on one or two named qubits."""

    qubits: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 2 ** len(self.qubits)
        if len(self.qubits) not in (1, 2) or m.shape != (dim, dim):
            raise ShapeError("fixed gates must be 2x2 on one qubit or 4x4 on two")
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return (isinstance(other, FixedGate) and self.qubits == other.qubits
                and np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash((self.qubits, self.matrix.tobytes()))


Gate = RYGate | CXGate | FixedGate


@dataclass(frozen=True)
class Ansatz:
    """Ordered gate program over ``n`` qubits with ``p`` independent angles.

    Every parameter index in 0..p-1 must appear on exactly one rotation;
    shared parameters are not supported.
    """

    n: int
    program: tuple[Gate, ...]
    p: int = field(init=False)

    def __post_init__(self):
        seen = []
        for g in self.program:
            qubits = (g.qubit,) if isinstance(g, RYGate) else \
                ((g.control, g.target) if isinstance(g, CXGate) else g.qubits)
            if any(q < 0 or q >= self.n for q in qubits):
                raise ShapeError(f"gate {g} acts outside 0..{self.n - 1}")
            if isinstance(g, RYGate):
                seen.append(g.param)
        p = len(seen)
        if sorted(seen) != list(range(p)):
            raise ConfigError("parameter indices must be 0..p-1, each exactly once")
        object.__setattr__(self, "p", p)

    def to_text(self) -> str:
        lines = []
        for g in self.program:
            if isinstance(g, RYGate):
                lines.append(f"RY q{g.qubit} p{g.param}")
            elif isinstance(g, CXGate):
                lines.append(f"CX q{g.control} q{g.target}")
            else:
                qs = ",".join(f"q{q}" for q in g.qubits)
                entries = " ".join(str(complex(z)) for z in g.matrix.ravel())
                lines.append(f"FIXED {qs} {entries}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str, n: int) -> "Ansatz":
        program: list[Gate] = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            kind, rest = line.split(None, 1)
            if kind == "RY":
                q, pidx = rest.split()
                program.append(RYGate(int(q[1:]), int(pidx[1:])))
            elif kind == "CX":
                c, t = rest.split()
                program.append(CXGate(int(c[1:]), int(t[1:])))
            elif kind == "FIXED":
                qs, *entries = rest.split()
                qubits = tuple(int(q[1:]) for q in qs.split(","))
                dim = 2 ** len(qubits)
                mat = np.array([complex(e.strip("()")) for e in entries]) \
                    .reshape(dim, dim)
                program.append(FixedGate(qubits, mat))
            else:
                raise ConfigError(f"unknown gate line {line!r}")
        return cls(n=n, program=tuple(program))


def build_brickwork_ry_cx(n: int, depth: int) -> Ansatz:
    """Open-boundary brickwork of RY rotations and CX entanglers.

    One initial RY layer on every qubit, then ``depth`` CX layers on
    alternating adjacent pairs (even layers start at qubit 0, odd at qubit 1),
    each CX followed by a fresh RY on both of its qubits.
    """
    if n < 2:
        raise InvalidSizeError("brickwork ansatz needs at least 2 qubits")
    if depth < 1:
        raise InvalidSizeError("depth must be at least 1")
    program: list[Gate] = []
    k = 0
    for q in range(n):
        program.append(RYGate(q, k))
        k += 1
    for layer in range(depth):
        start = layer % 2
        pairs = [(q, q + 1) for q in range(start, n - 1, 2)]
        for c, t in pairs:
            program.append(CXGate(c, t))
        for c, t in pairs:
            program.append(RYGate(c, k))
            k += 1
            program.append(RYGate(t, k))
            k += 1
    return Ansatz(n=n, program=tuple(program))


def _apply_ry_batch(state: np.ndarray, axis: int, theta: np.ndarray) -> None:
    """In-place RY(theta) = exp(-iY theta/2) on one qubit axis, batched."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    shape = (-1,) + (1,) * (state.ndim - 2)
    c = c.reshape(shape)
    s = s.reshape(shape)
    sl0 = (slice(None),) * axis + (0,)
    sl1 = (slice(None),) * axis + (1,)
    a0 = state[sl0]
    a1 = state[sl1]
    new0 = c * a0 - s * a1
    state[sl1] = s * a0 + c * a1
    state[sl0] = new0


def _apply_cx_batch(state: np.ndarray, n: int, control: int, target: int) -> None:
    idx = [slice(None)] * (n + 1)
    idx[1 + control] = 1
    sub = state[tuple(idx)]
    t_axis = 1 + target - (1 if target > control else 0)
    i0 = [slice(None)] * sub.ndim
    i1 = [slice(None)] * sub.ndim
    i0[t_axis] = 0
    i1[t_axis] = 1
    tmp = sub[tuple(i0)].copy()
    sub[tuple(i0)] = sub[tuple(i1)]
    sub[tuple(i1)] = tmp


def _apply_fixed_batch(state: np.ndarray, n: int, gate: FixedGate) -> np.ndarray:
    axes = [1 + q for q in gate.qubits]
    k = len(axes)
    moved = np.moveaxis(state, axes, range(state.ndim - k, state.ndim))
    lead = moved.shape[: state.ndim - k]
    flat = moved.reshape(-1, 2 ** k)
    flat = flat @ gate.matrix.T
    moved = flat.reshape(lead + (2,) * k)
    return np.moveaxis(moved, range(state.ndim - k, state.ndim), axes)


def simulate_batch(a: Ansatz, thetas: np.ndarray,
                   init: np.ndarray | None = None) -> np.ndarray:
    """Propagate a (B, p) batch of angle vectors; returns (B, 2^n) states.

    ``init`` may supply a (B, 2^n) batch of initial states (default |0...0>).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    B = thetas.shape[0]
    if thetas.shape[1] != a.p:
        raise ShapeError(f"expected {a.p} angles, got {thetas.shape[1]}")
    dim = 1 << a.n
    if init is None:
        state = np.zeros((B, dim), dtype=complex)
        state[:, 0] = 1.0
    else:
        init = np.asarray(init, dtype=complex)
        if init.shape != (B, dim):
            raise ShapeError("initial state batch has wrong shape")
        state = init.copy()
    state = state.reshape((B,) + (2,) * a.n)
    for g in a.program:
        if isinstance(g, RYGate):
            _apply_ry_batch(state, 1 + g.qubit, thetas[:, g.param])
        elif isinstance(g, CXGate):
            _apply_cx_batch(state, a.n, g.control, g.target)
        else:
            state = _apply_fixed_batch(state, a.n, g)
    return np.ascontiguousarray(state.reshape(B, dim))


def simulate(a: Ansatz, theta: np.ndarray) -> np.ndarray:
    """U(theta)|0...0> as a length-2^n statevector."""
    return simulate_batch(a, np.asarray(theta, dtype=float)[None, :])[0]


def unitary_batch(a: Ansatz, thetas: np.ndarray, cap: int = 10) -> np.ndarray:
    """Dense circuit unitaries, shape (B, 2^n, 2^n), columns simulated from
    the computational basis states."""
    from .errors import CapacityError

    if a.n > cap:
        raise CapacityError(f"dense unitary construction capped at {cap} qubits")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    B = thetas.shape[0]
    dim = 1 << a.n
    rep_thetas = np.repeat(thetas, dim, axis=0)
    init = np.tile(np.eye(dim, dtype=complex), (B, 1))
    cols = simulate_batch(a, rep_thetas, init=init)
    # column j of U is U|j>; simulate returns rows, so transpose per block
    return cols.reshape(B, dim, dim).transpose(0, 2, 1)


def energy(a: Ansatz, theta: np.ndarray, h: pauli.PauliSum) -> float:
    """Exact E(theta) = <psi(theta)|H|psi(theta)>."""
    if h.n != a.n:
        raise ShapeError("Hamiltonian and ansatz qubit counts differ")
    return pauli.expectation(h, simulate(a, theta))


def energy_batch(a: Ansatz, thetas: np.ndarray, h: pauli.PauliSum) -> np.ndarray:
    if h.n != a.n:
        raise ShapeError("Hamiltonian and ansatz qubit counts differ")
    return pauli.expectation_batch(h, simulate_batch(a, thetas))


def parameter_shift_gradient(a: Ansatz, theta: np.ndarray,
                             h: pauli.PauliSum) -> np.ndarray:
    """Exact gradient via the single-Pauli parameter-shift rule.

    Component i is (E(theta + (pi/2) e_i) - E(theta - (pi/2) e_i)) / 2.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (a.p,):
        raise ShapeError(f"expected {a.p} angles")
    params = [g.param for g in a.program if isinstance(g, RYGate)]
    if len(set(params)) != len(params):
        raise UnsupportedError("shared parameter indices are not supported")
    shifts = np.concatenate([np.eye(a.p), -np.eye(a.p)]) * (np.pi / 2)
    vals = energy_batch(a, theta[None, :] + shifts, h)
    return (vals[: a.p] - vals[a.p:]) / 2.0


@dataclass
class EnergyEvaluator:
    """Energy oracle: exact when ``shots`` is None, sampled otherwise.

    Shot sampling partitions the Hamiltonian into the Z-diagonal measurement
    group (I/Z strings) and the X group (I/X strings, measured after a
    Hadamard layer); each group draws ``shots`` outcomes from its exact
    distribution.  A global depolarizing parameter ``depolarizing`` mixes each
    distribution with the uniform one.  Each call uses a fresh RNG stream
    derived from ``(seed, call_counter)``, so evaluations are reproducible
    and independent.
    """

    ansatz: Ansatz
    hamiltonian: pauli.PauliSum
    shots: int | None = None
    depolarizing: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots <= 0:
            raise ConfigError("shots must be positive")
        if not 0.0 <= self.depolarizing <= 1.0:
            raise ConfigError("depolarizing parameter must lie in [0, 1]")
        if self.hamiltonian.n != self.ansatz.n:
            raise ShapeError("Hamiltonian and ansatz qubit counts differ")
        self.calls = 0
        if self.shots is not None:
            self._z_vals, self._x_vals = self._group_values()

    def _group_values(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.ansatz.n
        dim = 1 << n
        idx = np.arange(dim)
        z_vals = np.zeros(dim)
        x_vals = np.zeros(dim)
        for c, p in self.hamiltonian.terms:
            chars = set(p.ops)
            if chars <= {"I", "Z"}:
                target, letter = z_vals, "Z"
            elif chars <= {"I", "X"}:
                target, letter = x_vals, "X"
            else:
                raise ConfigError(
                    f"term {p} is outside the Z-diagonal/X measurement groups")
            signs = np.ones(dim)
            for q, op in enumerate(p.ops):
                if op == letter:
                    bit = (idx >> (n - 1 - q)) & 1
                    signs = signs * (1.0 - 2.0 * bit)
            target += c * signs
        return z_vals, x_vals

    def _exact(self, theta: np.ndarray) -> float:
        e = energy(self.ansatz, theta, self.hamiltonian)
        if self.depolarizing > 0.0:
            mixed = pauli.trace_coefficient(self.hamiltonian) / (1 << self.ansatz.n)
            e = (1.0 - self.depolarizing) * e + self.depolarizing * mixed
        return e

    def __call__(self, theta: np.ndarray) -> float:
        self.calls += 1
        theta = np.asarray(theta, dtype=float)
        if self.shots is None:
            return self._exact(theta)
        n = self.ansatz.n
        dim = 1 << n
        psi = simulate(self.ansatz, theta)
        rng = np.random.default_rng((self.seed, self.calls))
        total = 0.0
        hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
        for vals, rotate in ((self._z_vals, False), (self._x_vals, True)):
            phi = psi
            if rotate:
                phi = phi.reshape((1,) + (2,) * n)
                for q in range(n):
                    phi = _apply_fixed_batch(phi, n, FixedGate((q,), hadamard))
                phi = phi.reshape(dim)
            probs = np.abs(phi) ** 2
            probs = probs / probs.sum()
            if self.depolarizing > 0.0:
                probs = (1.0 - self.depolarizing) * probs + self.depolarizing / dim
            counts = rng.multinomial(self.shots, probs)
            total += float(counts @ vals) / self.shots
        return total
