"""Joint outcome probabilities for sequential flavor measurements.

Tables are numpy arrays indexed by ``Outcome.index`` (F -> 0, NOT_F -> 1).
The analytic tables use the transition probabilities from ``dynamics``; the
``*_oracle`` variants compute the same quantities as trace chains
Tr[P_On V[... P_O1 V[rho0] P_O1 ...] P_On] of GKLS-evolved states, with no
renormalization after the projections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .params import Flavor, MesonParams, Outcome


class OrderingError(ValueError):
    pass


@dataclass(frozen=True)
class JointDist2:
    """P(O1, O2) for measurements after gaps dt1 = t1 - t0 and dt2 = t2 - t1."""

    p: np.ndarray
    params: MesonParams
    flavor: Flavor
    dt1: float
    dt2: float

    def __getitem__(self, key: tuple[Outcome, Outcome]):
        o1, o2 = key
        return self.p[o1.index, o2.index]


@dataclass(frozen=True)
class JointDist3:
    """P(O0, O1, O2) for measurements at t0 <= t1 <= t2."""

    p: np.ndarray
    params: MesonParams
    flavor: Flavor
    t0: float
    t1: float
    t2: float

    def __getitem__(self, key: tuple[Outcome, Outcome, Outcome]):
        o0, o1, o2 = key
        return self.p[o0.index, o1.index, o2.index]


@dataclass(frozen=True)
class CorrelatorSet:
    c01: float
    c12: float
    c02: float


def single(params: MesonParams, flavor: Flavor, dt) -> np.ndarray:
    """Distribution (P(F), P(not F)) of one measurement ``dt`` after preparation."""
    pff = dyn.survival_prob(params, dt, flavor)
    return np.array([pff, 1 - pff])


def joint2(params: MesonParams, flavor: Flavor, dt1, dt2) -> JointDist2:
    """Two-measurement table for a meson prepared in ``flavor``.

    P(F,F)   = Pff(dt1) Pff(dt2)
    P(F,~F)  = Pff(dt1) (1 - Pff(dt2))
    P(~F,F)  = Pfb(dt1) Pbf(dt2)
    P(~F,~F) = 1 - Pff(dt1) - Pfb(dt1) Pbf(dt2)
    """
    if dt1 < 0 or dt2 < 0:
        raise OrderingError("time gaps must be non-negative")
    pff1 = dyn.survival_prob(params, dt1, flavor)
    pff2 = dyn.survival_prob(params, dt2, flavor)
    pfb1 = dyn.oscillation_prob(params, dt1, flavor)
    pbf2 = dyn.oscillation_prob(params, dt2, flavor.conj)
    back = pfb1 * pbf2
    p = np.array(
        [
            [pff1 * pff2, pff1 * (1 - pff2)],
            [back, 1 - pff1 - back],
        ]
    )
    return JointDist2(p, params, flavor, dt1, dt2)


def _check_order(t0, t1, t2) -> None:
    if not t0 <= t1 <= t2:
        raise OrderingError(f"measurement times must satisfy t0 <= t1 <= t2, got {(t0, t1, t2)}")


def joint3(params: MesonParams, flavor: Flavor, t0, t1, t2) -> JointDist3:
    """Three-measurement table; the t0 measurement confirms the prepared flavor.

    It returns F with certainty and leaves the state untouched, so the O0 = F
    slice is the ``joint2`` table and the O0 = not F slice vanishes.
    """
    _check_order(t0, t1, t2)
    two = joint2(params, flavor, t1 - t0, t2 - t1).p
    p = np.zeros((2, 2, 2), dtype=two.dtype)
    p[Outcome.F.index] = two
    return JointDist3(p, params, flavor, t0, t1, t2)


# ---------------------------------------------------------------------------
# projective GKLS oracles


def outcome_projectors(flavor: Flavor, dtype=np.complex128) -> tuple[np.ndarray, np.ndarray]:
    """Projectors (P_F, 1 - P_F) on the 4-dim space; 1 - P_F = P_conjF + P_d."""
    pf = dyn.flavor_projector(flavor, 4, dtype)
    return pf, np.eye(4, dtype=dtype) - pf


def measurement_chain(gen: dyn.GklsGenerators, rho0: np.ndarray, durations, projectors, step: float) -> np.ndarray:
    """Probabilities of every outcome sequence for measurements after ``durations``.

    ``projectors`` lists the projector for each outcome index. Returns an array
    of shape (len(projectors),) * len(durations).
    """
    k = len(projectors)
    branches = np.asarray(rho0)[None]
    for dt in durations:
        branches = dyn.propagate(gen, branches, dt, step)
        branches = np.stack([pr @ b @ pr for b in branches for pr in projectors])
    probs = np.trace(branches, axis1=-2, axis2=-1).real
    return probs.reshape((k,) * len(durations))


def _oracle_setup(params, flavor, step, dtype):
    gen = dyn.build_generators(params, dtype)
    if step is None:
        step = dyn.default_step(params)
    return gen, step, outcome_projectors(flavor, dtype)


def joint2_oracle(params: MesonParams, flavor: Flavor, dt1, dt2, step: float | None = None,
                  dtype=np.complex128) -> JointDist2:
    if dt1 < 0 or dt2 < 0:
        raise OrderingError("time gaps must be non-negative")
    gen, step, proj = _oracle_setup(params, flavor, step, dtype)
    rho0 = dyn.flavor_projector(flavor, 4, dtype)
    p = measurement_chain(gen, rho0, (dt1, dt2), proj, step)
    return JointDist2(p, params, flavor, dt1, dt2)


def joint3_oracle(params: MesonParams, flavor: Flavor, t0, t1, t2, step: float | None = None,
                  dtype=np.complex128) -> JointDist3:
    _check_order(t0, t1, t2)
    gen, step, proj = _oracle_setup(params, flavor, step, dtype)
    rho0 = dyn.flavor_projector(flavor, 4, dtype)
    p = measurement_chain(gen, rho0, (0.0, t1 - t0, t2 - t1), proj, step)
    return JointDist3(p, params, flavor, t0, t1, t2)


# ---------------------------------------------------------------------------
# correlators


def correlators(params: MesonParams, flavor: Flavor, t) -> CorrelatorSet:
    """Two-time correlators for the equidistant protocol t0 = 0, t1 = t, t2 = 2t."""
    if np.any(np.asarray(t) < 0):
        raise OrderingError("t must be non-negative")
    pff = dyn.survival_prob(params, t, flavor)
    pff2 = dyn.survival_prob(params, 2 * np.asarray(t), flavor)
    back = dyn.oscillation_prob(params, t, flavor) * dyn.oscillation_prob(params, t, flavor.conj)
    return CorrelatorSet(
        c01=2 * pff - 1,
        c12=1 - 2 * pff * (1 - pff) - 2 * back,
        c02=2 * pff2 - 1,
    )


def correlator(table: np.ndarray) -> float:
    """<Oi Oj> = sum over outcomes of Oi Oj P(Oi, Oj) for a 2x2 table."""
    return sum(a.value * b.value * table[a.index, b.index] for a, b in itertools.product(Outcome, Outcome))


def correlators_from_tables(params: MesonParams, flavor: Flavor, t) -> CorrelatorSet:
    """Correlators summed outcome by outcome from the joint tables."""
    p3 = joint3(params, flavor, 0.0, t, 2 * t).p
    return CorrelatorSet(
        c01=correlator(p3.sum(axis=2)),
        c12=correlator(p3.sum(axis=0)),
        c02=correlator(joint2(params, flavor, 0.0, 2 * t).p),
    )
