import numpy as np
import pytest

from nlwalk import (
    Ensemble,
    LatticeMeasure,
    ModelParams,
    Window,
    run_particles,
)
from nlwalk.errors import StepTooLarge

PARAMS = ModelParams()


def make_ensemble(n=100, seed=0, m=10):
    rng = np.random.default_rng(seed)
    w = Window.symmetric(m)
    return Ensemble.from_measure(
        PARAMS, LatticeMeasure.delta(0, w), 0.5, -0.3, n, rng
    )


class TestStep:
    def test_zero_dt_noop(self):
        ens = make_ensemble()
        before = ens.positions.copy()
        ens.step(0.0, np.random.default_rng(1))
        assert np.array_equal(ens.positions, before)
        assert ens.t == 0.0

    def test_step_too_large(self):
        ens = make_ensemble()
        with pytest.raises(StepTooLarge):
            ens.step(1.0, np.random.default_rng(1))

    def test_single_particle_jump_probabilities(self):
        # at L = M = 0 with the particle at 0 both jump probabilities are dt
        w = Window.symmetric(5)
        n_trials = 200_000
        dt = 0.01
        rng = np.random.default_rng(7)
        up = down = 0
        for _ in range(n_trials // 1000):
            ens = Ensemble(PARAMS, w, np.zeros(1000, dtype=int), 0.0, 0.0)
            ens.step(dt, rng)
            up += int((ens.positions == 1).sum())
            down += int((ens.positions == -1).sum())
        se = 3 * np.sqrt(dt / n_trials)
        assert up / n_trials == pytest.approx(dt, abs=se)
        assert down / n_trials == pytest.approx(dt, abs=se)

    def test_K_drift_small(self):
        drifts = []
        for seed in range(5):
            log = run_particles(
                PARAMS, LatticeMeasure.delta(0, Window.symmetric(15)),
                0.5, -0.3, 2000, 1.0, 1e-3, seed=seed,
            )
            drifts.append(abs(log.samples[-1].K_N - log.samples[0].K_N))
        # drift is O(dt) bias plus O(sqrt(T/N)) fluctuation
        assert np.mean(drifts) < 0.1


class TestRun:
    def test_reproducible(self):
        args = (PARAMS, LatticeMeasure.delta(0, Window.symmetric(10)),
                0.5, -0.3, 500, 0.5, 1e-3)
        a = run_particles(*args, seed=21)
        b = run_particles(*args, seed=21)
        c = run_particles(*args, seed=22)
        for sa, sb in zip(a.samples, b.samples):
            assert sa.L == sb.L and sa.M == sb.M
            assert np.array_equal(sa.histogram, sb.histogram)
        assert any(
            not np.array_equal(sa.histogram, sc.histogram)
            for sa, sc in zip(a.samples, c.samples)
        )

    def test_confined_to_window(self):
        w = Window.symmetric(4)
        log = run_particles(
            PARAMS, LatticeMeasure.delta(0, w), 0.2, -0.2, 400, 2.0, 1e-3, seed=3
        )
        for s in log.samples:
            assert s.histogram.sum() == pytest.approx(1.0)
        assert log.empirical_measure().window == w

    def test_sample_times_recorded(self):
        log = run_particles(
            PARAMS, LatticeMeasure.delta(0, Window.symmetric(8)),
            0.2, -0.2, 100, 1.0, 1e-3, seed=1, n_samples=11,
        )
        assert len(log.samples) == 11
        assert log.samples[0].t == 0.0
        assert log.samples[-1].t == pytest.approx(1.0, abs=1e-9)
