import numpy as np
import pytest

from qkvqe.bo import BORecord, BOTrace
from qkvqe.circuit import build_brickwork_ry_cx, energy
from qkvqe.errors import ConfigError
from qkvqe.pauli import build_tfim
from qkvqe.spsa import SPSAConfig, TARGET_FIRST_STEP, run_spsa, trailing_mean_error


class TestConfig:
    def test_odd_calibration_budget_rejected(self):
        with pytest.raises(ConfigError):
            SPSAConfig(calibration_evaluations=49)

    def test_budget_must_cover_calibration(self):
        with pytest.raises(ConfigError):
            SPSAConfig(max_evaluations=40, calibration_evaluations=50)

    def test_gains_positive(self):
        with pytest.raises(ConfigError):
            SPSAConfig(c=0.0)


class TestRun:
    def test_trace_accounts_for_every_evaluation(self):
        calls = []

        def f(x):
            calls.append(1)
            return float(np.sum(np.asarray(x) ** 2))

        cfg = SPSAConfig(max_evaluations=200, calibration_evaluations=50, seed=0)
        tr = run_spsa(f, cfg, np.ones(4))
        assert len(calls) == 200
        assert tr.evaluator_calls == 200
        assert len(tr.records) == 200
        assert tr.final_theta is not None

    def test_deterministic_by_seed(self):
        f = lambda x: float(np.sum(np.asarray(x) ** 2))
        cfg = SPSAConfig(max_evaluations=100, calibration_evaluations=10, seed=5)
        t1 = run_spsa(f, cfg, np.ones(3))
        t2 = run_spsa(f, cfg, np.ones(3))
        assert np.allclose(t1.y, t2.y)
        assert np.allclose(t1.final_theta, t2.final_theta)

    def test_quadratic_convergence(self):
        f = lambda x: float(np.sum(np.asarray(x) ** 2))
        cfg = SPSAConfig(max_evaluations=600, calibration_evaluations=50, seed=1)
        tr = run_spsa(f, cfg, np.full(4, 2.0))
        assert np.linalg.norm(tr.final_theta) < 0.5
        assert float(np.mean(tr.y[-25:])) < 0.3

    def test_calibrated_first_step_size(self):
        # on a linear objective the gradient estimate is exact, so the first
        # post-calibration update has the target length
        g = np.array([0.7, -0.3])
        f = lambda x: float(g @ np.asarray(x))
        cfg = SPSAConfig(max_evaluations=52, calibration_evaluations=50, seed=2)
        theta0 = np.zeros(2)
        tr = run_spsa(f, cfg, theta0)
        step = np.linalg.norm(tr.final_theta - theta0)
        # |ghat_i| = mean|g.delta/delta_i| is the same for every coordinate;
        # the step is a_1 * |ghat| * sqrt(p) with a calibrated so that
        # a_1 * avg|ghat| = target/sqrt(p)... verify the scale, not the exact
        # constant: within a factor of two of the target length
        assert 0.5 * TARGET_FIRST_STEP < step < 2.0 * TARGET_FIRST_STEP

    def test_fixed_a_skips_calibration_scaling(self):
        f = lambda x: float(np.sum(np.asarray(x) ** 2))
        cfg = SPSAConfig(max_evaluations=60, calibration_evaluations=2,
                         a=0.05, seed=3)
        tr = run_spsa(f, cfg, np.ones(2))
        assert len(tr.records) == 60

    def test_tfim_energy_descent(self):
        a = build_brickwork_ry_cx(2, 1)
        H = build_tfim(2, 0.5, -0.5, 0.5)
        from qkvqe.features import dense_hamiltonian
        e_opt = float(np.linalg.eigvalsh(dense_hamiltonian(H)).min())
        ev = lambda th: energy(a, th, H)
        cfg = SPSAConfig(max_evaluations=400, calibration_evaluations=50, seed=0)
        tr = run_spsa(ev, cfg, np.zeros(a.p), e_opt=e_opt)
        assert trailing_mean_error(tr, e_opt) < 0.2
        assert tr.records[-1].error <= tr.records[49].error


class TestTrailingMean:
    def test_uses_last_window_only(self):
        records = [BORecord(i, np.zeros(1), y, min(y, 0.0), None, {}, 0.0)
                   for i, y in enumerate([5.0] * 10 + [-1.0] * 25)]
        tr = BOTrace(kernel_kind="spsa", seed=0, records=records)
        assert trailing_mean_error(tr, -2.0) == pytest.approx((-1.0 + 2.0) / 2.0)
