import numpy as np
import pytest

from qkvqe.circuit import build_brickwork_ry_cx
from qkvqe.errors import ConfigError, ShapeError
from qkvqe.kernels import (JITTER, KernelEngine, KernelSpec, classical_kernel,
                           cross_kernel, gram, state_kernel, unitary_kernel)

from .conftest import dense_circuit_unitary, dense_simulate


@pytest.fixture(scope="module")
def ansatz():
    return build_brickwork_ry_cx(3, 2)


class TestKernelSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            KernelSpec(kind="linear")

    def test_quantum_kind_requires_ansatz(self):
        with pytest.raises(ConfigError):
            KernelSpec(kind="state")

    def test_positive_hyperparameters_enforced(self):
        with pytest.raises(ConfigError):
            KernelSpec(kind="rbf", lengthscale=0.0)
        with pytest.raises(ConfigError):
            KernelSpec(kind="rq", alpha=-1.0)
        with pytest.raises(ConfigError):
            KernelSpec(kind="rbf", noise_variance=-0.1)

    def test_with_hypers_returns_new_spec(self):
        spec = KernelSpec(kind="rbf")
        other = spec.with_hypers(lengthscale=2.0)
        assert spec.lengthscale == 1.0 and other.lengthscale == 2.0


class TestQuantumKernels:
    def test_state_kernel_matches_dense_overlap(self, ansatz, rng):
        x, xp = rng.uniform(-np.pi, np.pi, (2, ansatz.p))
        oracle = abs(np.vdot(dense_simulate(ansatz, xp),
                             dense_simulate(ansatz, x))) ** 2
        assert state_kernel(ansatz, x, xp) == pytest.approx(oracle, abs=1e-12)

    def test_unitary_kernel_matches_dense_trace(self, ansatz, rng):
        x, xp = rng.uniform(-np.pi, np.pi, (2, ansatz.p))
        U = dense_circuit_unitary(ansatz, x)
        Up = dense_circuit_unitary(ansatz, xp)
        oracle = abs(np.trace(Up.conj().T @ U) / 8) ** 2
        assert unitary_kernel(ansatz, x, xp) == pytest.approx(oracle, abs=1e-12)

    def test_identical_inputs_give_one(self, ansatz, rng):
        x = rng.uniform(-np.pi, np.pi, ansatz.p)
        assert state_kernel(ansatz, x, x) == pytest.approx(1.0, abs=1e-12)
        assert unitary_kernel(ansatz, x, x) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry_and_range(self, ansatz, rng):
        for _ in range(5):
            x, xp = rng.uniform(-np.pi, np.pi, (2, ansatz.p))
            for k in (state_kernel, unitary_kernel):
                v, vt = k(ansatz, x, xp), k(ansatz, xp, x)
                assert v == pytest.approx(vt, abs=1e-12)
                assert -1e-12 <= v <= 1 + 1e-12


class TestClassicalKernels:
    CASES = ["matern32", "matern52", "rbf", "rq"]

    @pytest.mark.parametrize("kind", CASES)
    def test_unit_at_zero_distance(self, kind):
        spec = KernelSpec(kind=kind, lengthscale=0.7)
        x = np.array([0.3, -1.2])
        assert classical_kernel(spec, x, x) == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", CASES)
    def test_decreasing_in_distance(self, kind):
        spec = KernelSpec(kind=kind, lengthscale=1.3, alpha=2.0)
        vals = [classical_kernel(spec, np.zeros(2), np.array([d, 0.0]))
                for d in np.linspace(0.0, 4.0, 9)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_rbf_closed_form(self):
        spec = KernelSpec(kind="rbf", lengthscale=2.0)
        d = 1.5
        assert classical_kernel(spec, np.zeros(1), np.array([d])) == \
            pytest.approx(np.exp(-d ** 2 / 8.0), abs=1e-14)

    def test_matern32_closed_form(self):
        spec = KernelSpec(kind="matern32", lengthscale=1.0)
        d = 2.0
        u = np.sqrt(3) * d
        assert classical_kernel(spec, np.zeros(1), np.array([d])) == \
            pytest.approx((1 + u) * np.exp(-u), abs=1e-14)

    def test_rq_approaches_rbf_at_large_alpha(self):
        d = np.array([0.9])
        rq = KernelSpec(kind="rq", lengthscale=1.0, alpha=1e6)
        rbf = KernelSpec(kind="rbf", lengthscale=1.0)
        assert classical_kernel(rq, np.zeros(1), d) == \
            pytest.approx(classical_kernel(rbf, np.zeros(1), d), abs=1e-6)


class TestGram:
    def test_scaling_and_diagonal(self, ansatz, rng):
        spec = KernelSpec(kind="state", ansatz=ansatz, signal_variance=2.5,
                          noise_variance=0.3)
        X = rng.uniform(-np.pi, np.pi, (6, ansatz.p))
        K = gram(spec, X)
        assert np.allclose(np.diag(K), 2.5 + 0.3 + JITTER, atol=1e-10)
        assert np.allclose(K, K.T)
        # off-diagonal entries match the scalar kernel
        assert K[0, 1] == pytest.approx(
            2.5 * state_kernel(ansatz, X[0], X[1]), abs=1e-10)

    def test_positive_semidefinite(self, ansatz, rng):
        for kind in ("state", "unitary", "rbf", "matern52"):
            spec = KernelSpec(kind=kind,
                              ansatz=ansatz if kind in ("state", "unitary")
                              else None)
            X = rng.uniform(-np.pi, np.pi, (10, ansatz.p))
            w = np.linalg.eigvalsh(gram(spec, X))
            assert w.min() > -1e-10

    def test_empty_input_rejected(self, ansatz):
        with pytest.raises(ShapeError):
            gram(KernelSpec(kind="rbf"), np.empty((0, 3)))

    def test_cross_kernel_column(self, ansatz, rng):
        spec = KernelSpec(kind="state", ansatz=ansatz, signal_variance=1.7)
        X = rng.uniform(-np.pi, np.pi, (5, ansatz.p))
        xs = rng.uniform(-np.pi, np.pi, ansatz.p)
        col = cross_kernel(spec, X, xs)
        for i in range(5):
            assert col[i] == pytest.approx(
                1.7 * state_kernel(ansatz, X[i], xs), abs=1e-10)


class TestEngine:
    def test_pair_evaluation_instrumentation(self, ansatz, rng):
        engine = KernelEngine(KernelSpec(kind="state", ansatz=ansatz))
        X = rng.uniform(-np.pi, np.pi, (4, ansatz.p))
        f = engine.featurize(X)
        engine.k_base(f, f)
        assert engine.pair_evaluations == 16

    def test_engine_gram_matches_scalar_kernels(self, ansatz, rng):
        X = rng.uniform(-np.pi, np.pi, (4, ansatz.p))
        for kind, scalar in (("state", state_kernel), ("unitary", unitary_kernel)):
            engine = KernelEngine(KernelSpec(kind=kind, ansatz=ansatz))
            f = engine.featurize(X)
            K = engine.k_base(f, f)
            for i in range(4):
                for j in range(4):
                    assert K[i, j] == pytest.approx(
                        scalar(ansatz, X[i], X[j]), abs=1e-12)
            assert np.allclose(np.diag(K), 1.0, atol=1e-12)

    def test_featurize_fd_matches_batch(self, ansatz, rng):
        x = rng.uniform(-np.pi, np.pi, ansatz.p)
        step = 1e-6
        for kind in ("state", "unitary"):
            engine = KernelEngine(KernelSpec(kind=kind, ansatz=ansatz))
            batch = np.tile(x, (2 * ansatz.p + 1, 1))
            for i in range(ansatz.p):
                batch[1 + 2 * i, i] += step
                batch[2 + 2 * i, i] -= step
            assert np.allclose(engine.featurize_fd(x, step),
                               engine.featurize(batch), atol=1e-12)
