"""Interacting-particle approximation of the coupled (p, L, M) dynamics.

N walkers share one pair of barriers (L, M).  Per step: the barriers move
by an Euler update driven by the empirical jump-rate averages, then every
walker attempts one jump by first-order thinning with the shared time
step.  The empirical mean position plus L + M is tracked as an invariant
check, mirroring the conserved quantity of the deterministic system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import StepTooLarge
from .lattice import LatticeMeasure, Window
from .model import ModelParams, rate_arrays

RATE_DT_LIMIT = 0.1


@dataclass
class ParticleSample:
    t: float
    L: float
    M: float
    K_N: float
    histogram: np.ndarray  # empirical measure over the window


@dataclass
class ParticleLog:
    params: ModelParams
    window: Window
    n_particles: int
    seed: int
    samples: List[ParticleSample] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def final(self) -> ParticleSample:
        return self.samples[-1]

    def empirical_measure(self, k: int = -1) -> LatticeMeasure:
        return LatticeMeasure(self.window, self.samples[k].histogram)


@dataclass
class Ensemble:
    params: ModelParams
    window: Window
    positions: np.ndarray  # integer sites, shape (N,)
    L: float
    M: float
    t: float = 0.0

    @classmethod
    def from_measure(
        cls,
        params: ModelParams,
        p0: LatticeMeasure,
        L0: float,
        M0: float,
        n_particles: int,
        rng: np.random.Generator,
    ) -> "Ensemble":
        probs = np.clip(p0.values, 0.0, None)
        probs = probs / probs.sum()
        positions = rng.choice(p0.window.sites(), size=n_particles, p=probs)
        return cls(params, p0.window, positions.astype(int), L0, M0)

    def histogram(self) -> np.ndarray:
        counts = np.bincount(
            self.positions - self.window.n_min, minlength=self.window.size
        )
        return counts / len(self.positions)

    def K_N(self) -> float:
        return self.L + self.M + float(self.positions.mean())

    def step(self, dt: float, rng: np.random.Generator) -> None:
        """One first-order step: Euler (L, M) update from pre-jump empirical
        rates, then synchronous thinning of all walkers."""
        if dt == 0.0:
            return
        lam, mu = rate_arrays(self.params, self.L, self.M, self.window)
        idx = self.positions - self.window.n_min
        lam_i = lam[idx]
        mu_i = mu[idx]
        # first-order thinning needs (lam+mu)*dt small at every *occupied*
        # site; empty far-edge sites carry huge rates but no walkers
        max_rate = float((lam_i + mu_i).max())
        if max_rate * dt > RATE_DT_LIMIT:
            raise StepTooLarge(
                f"max rate * dt = {max_rate * dt:g} > {RATE_DT_LIMIT:g}; shrink dt"
            )
        self.L += dt * (self.params.C_lambda - float(lam_i.mean()))
        self.M += dt * (float(mu_i.mean()) - self.params.C_mu)
        u = rng.random(len(self.positions))
        up = u < lam_i * dt
        down = (~up) & (u < (lam_i + mu_i) * dt)
        self.positions = self.positions + up.astype(int) - down.astype(int)
        self.t += dt


def run_particles(
    params: ModelParams,
    p0: LatticeMeasure,
    L0: float,
    M0: float,
    n_particles: int,
    t_final: float,
    dt: float,
    seed: int,
    n_samples: int = 51,
    sample_times: Optional[Sequence[float]] = None,
) -> ParticleLog:
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed)))
    ens = Ensemble.from_measure(params, p0, L0, M0, n_particles, rng)
    if sample_times is None:
        sample_times = np.linspace(0.0, t_final, n_samples)
    else:
        sample_times = np.asarray(sample_times, dtype=float)

    log = ParticleLog(params, p0.window, n_particles, seed)

    def record():
        log.samples.append(
            ParticleSample(ens.t, ens.L, ens.M, ens.K_N(), ens.histogram())
        )

    next_i = 0
    if math.isclose(sample_times[0], 0.0, abs_tol=1e-15):
        record()
        next_i = 1
    n_steps = int(math.ceil(t_final / dt - 1e-12))
    for k in range(n_steps):
        t_target = min((k + 1) * dt, t_final)
        ens.step(t_target - ens.t, rng)
        while next_i < len(sample_times) and ens.t >= sample_times[next_i] - 1e-12:
            record()
            next_i += 1
    while next_i < len(sample_times):
        record()
        next_i += 1
    return log
