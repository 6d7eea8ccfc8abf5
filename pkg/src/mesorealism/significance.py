"""Pseudo-experiment estimate of how significant an NSIT violation is.

The null hypothesis is a macrorealist world: P_FF(2t) is replaced by
P_FF(t)^2 + P_F->Fbar(t) P_Fbar->F(t), so N = 0 exactly. Each trial multiplies the four
input probabilities by independent (1 + rel_sigma * g), g ~ N(0, 1), clamps
them to [0, 1] and recomputes N. The observed value is the true-model N(t).

Random numbers come in blocks of ``BLOCK`` trials. Block b draws from
``SeedSequence(seed, spawn_key=(b,))``, so trial i always sees the same
numbers however the blocks are scheduled.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import dynamics as dyn
from .params import Flavor, MesonParams

BLOCK = 8192


class SignificanceError(ValueError):
    pass


@dataclass(frozen=True)
class PseudoConfig:
    t: float
    rel_sigma: float = 0.01
    n_trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.rel_sigma > 0:
            raise SignificanceError("rel_sigma must be positive")
        if self.n_trials < 100:
            raise SignificanceError("n_trials must be at least 100")
        if self.t < 0:
            raise SignificanceError("t must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise SignificanceError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SignificanceResult:
    n_observed: float
    null_mean: float
    null_sd: float
    z_score: float
    n_trials_used: int

    def to_json(self) -> str:
        d = asdict(self)
        d["n_trials"] = d.pop("n_trials_used")
        return json.dumps(d)


def _inputs(params: MesonParams, flavor: Flavor, t: float):
    pff = float(dyn.survival_prob(params, t, flavor))
    fwd = float(dyn.oscillation_prob(params, t, flavor))
    bwd = float(dyn.oscillation_prob(params, t, flavor.conj))
    pff2 = float(dyn.survival_prob(params, 2 * t, flavor))
    return pff, fwd, bwd, pff2


def _block_samples(seed: int, block: int, size: int, base: np.ndarray, rel_sigma: float):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    g = rng.standard_normal((size, 4))
    p = np.clip(base * (1 + rel_sigma * g), 0.0, 1.0)
    n_hat = p[:, 3] - p[:, 0] ** 2 - p[:, 1] * p[:, 2]
    return n_hat


def null_samples(params: MesonParams, flavor: Flavor, cfg: PseudoConfig, workers: int = 1) -> np.ndarray:
    """N-hat for every trial under the macrorealist null, in trial order."""
    pff, fwd, bwd, _ = _inputs(params, flavor, cfg.t)
    base = np.array([pff, fwd, bwd, pff * pff + fwd * bwd])
    sizes = [min(BLOCK, cfg.n_trials - b * BLOCK) for b in range(-(-cfg.n_trials // BLOCK))]

    def run(b):
        return _block_samples(cfg.seed, b, sizes[b], base, cfg.rel_sigma)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts)


def significance(params: MesonParams, flavor: Flavor, cfg: PseudoConfig, workers: int = 1) -> SignificanceResult:
    pff, fwd, bwd, pff2 = _inputs(params, flavor, cfg.t)
    n_obs = pff2 - pff * pff - fwd * bwd
    samples = null_samples(params, flavor, cfg, workers)
    mean = float(np.mean(samples))
    sd = float(np.std(samples, ddof=1))
    if not sd >= 1e-300:
        raise SignificanceError(f"degenerate null distribution (sd = {sd!r})")
    return SignificanceResult(
        n_observed=n_obs,
        null_mean=mean,
        null_sd=sd,
        z_score=(n_obs - mean) / sd,
        n_trials_used=int(samples.size),
    )
