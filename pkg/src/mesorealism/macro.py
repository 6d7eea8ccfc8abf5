"""Macrorealism conditions for the equidistant protocol t0 = 0, t1 = t, t2 = 2t.

LGIs are reported in probability form (macrorealism requires each >= 0), WLGIs
as written (each <= 0), and the single non-trivial NSIT combination

    N(t) = Pff(2t) - Pff(t)^2 - Pfb(t) Pbf(t)

must vanish. NSIT and AoT residuals are computed as LHS - RHS from the joint
tables for a fixed outcome assignment (default O0 = F, O1 = O2 = not F).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from . import proba
from .params import Flavor, MesonParams, Outcome

DEFAULT_OUTCOMES = (Outcome.F, Outcome.NOT_F, Outcome.NOT_F)

LGI_NAMES = ("L1", "L2", "L3", "L4")
WLGI_NAMES = ("W1", "W2", "W3")
NSIT_NAMES = ("nsit1_resid", "nsit2_resid", "nsit3_resid")
AOT_NAMES = ("aot1_resid", "aot2_resid", "aot3_resid")
QUANTITIES = LGI_NAMES + WLGI_NAMES + ("N",) + NSIT_NAMES + AOT_NAMES


def _base(params: MesonParams, flavor: Flavor, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    t = np.asarray(t)
    pff = dyn.survival_prob(params, t, flavor)
    pff2 = dyn.survival_prob(params, 2 * t, flavor)
    back = dyn.oscillation_prob(params, t, flavor) * dyn.oscillation_prob(params, t, flavor.conj)
    return pff, pff2, back


def lgi_values(params: MesonParams, flavor: Flavor, t):
    """(L1, L2, L3, L4) in probability form; accepts scalar or array ``t``."""
    pff, pff2, back = _base(params, flavor, t)
    sq = pff * pff
    return (
        pff2 + sq - back,
        pff2 - sq + back,
        -pff2 - sq + 2 * pff + back,
        -pff2 + sq + 2 * (1 - pff) - back,
    )


def lgi_from_correlators(c: proba.CorrelatorSet):
    """Correlator-form LGI combinations (twice the probability form)."""
    return (
        1 + c.c01 + c.c12 + c.c02,
        1 - c.c01 - c.c12 + c.c02,
        1 + c.c01 - c.c12 - c.c02,
        1 - c.c01 + c.c12 - c.c02,
    )


def _tables(params, flavor, t):
    p01 = proba.joint2(params, flavor, 0.0, t).p
    p02 = proba.joint2(params, flavor, 0.0, 2 * t).p
    p12 = proba.joint2(params, flavor, t, t).p
    p012 = proba.joint3(params, flavor, 0.0, t, 2 * t).p
    return p01, p02, p12, p012


def wlgi_values(params: MesonParams, flavor: Flavor, t, outcomes=DEFAULT_OUTCOMES):
    """(W1, W2, W3).

    For the default outcome assignment the closed forms are used, so W1 and W3
    are the same number. Other assignments are evaluated from the joint tables.
    """
    if tuple(outcomes) == DEFAULT_OUTCOMES:
        pff, pff2, back = _base(params, flavor, t)
        w1 = pff2 - pff - back
        return w1, back - pff2, w1
    return wlgi_from_tables(params, flavor, t, outcomes)


def wlgi_from_tables(params: MesonParams, flavor: Flavor, t, outcomes=DEFAULT_OUTCOMES):
    o0, o1, o2 = outcomes
    p01, p02, p12, _ = _tables(params, flavor, t)
    i0, i1, i2 = o0.index, o1.index, o2.index
    w1 = p12[i1, i2] - p01[o0.flip.index, i1] - p02[i0, i2]
    w2 = p02[i0, i2] - p01[i0, o1.flip.index] - p12[i1, i2]
    w3 = p01[i0, i1] - p12[i1, o2.flip.index] - p02[i0, i2]
    return w1, w2, w3


def nsit_value(params: MesonParams, flavor: Flavor, t):
    """N(t); zero for every t under macrorealism."""
    pff, pff2, back = _base(params, flavor, t)
    return pff2 - pff * pff - back


def nsit_residuals(params: MesonParams, flavor: Flavor, t, outcomes=DEFAULT_OUTCOMES):
    """NSIT(1..3) as LHS - RHS.

    NSIT(1): P(O2) - sum_O1 P(O1, O2)
    NSIT(2): P(O0, O2) - sum_O1 P(O0, O1, O2)
    NSIT(3): P(O1, O2) - sum_O0 P(O0, O1, O2)
    """
    o0, o1, o2 = (o.index for o in outcomes)
    p01, p02, p12, p012 = _tables(params, flavor, t)
    p2 = proba.single(params, flavor, 2 * t)
    return (
        p2[o2] - p12[:, o2].sum(),
        p02[o0, o2] - p012[o0, :, o2].sum(),
        p12[o1, o2] - p012[:, o1, o2].sum(),
    )


def aot_residuals(params: MesonParams, flavor: Flavor, t, outcomes=DEFAULT_OUTCOMES):
    """AoT(1..3) as LHS - RHS.

    AoT(1): P(O0, O1) - sum_O2 P(O0, O1, O2)
    AoT(2): P(O0) - sum_O1 P(O0, O1)
    AoT(3): P(O1) - sum_O2 P(O1, O2)
    """
    o0, o1, o2 = (o.index for o in outcomes)
    p01, p02, p12, p012 = _tables(params, flavor, t)
    p0 = proba.single(params, flavor, 0.0)
    p1 = proba.single(params, flavor, t)
    return (
        p01[o0, o1] - p012[o0, o1, :].sum(),
        p0[o0] - p01[o0, :].sum(),
        p1[o1] - p12[o1, :].sum(),
    )


@dataclass(frozen=True)
class MacroReport:
    t: float
    l: tuple[float, float, float, float]
    w: tuple[float, float, float]
    nsit_n: float
    nsit_residuals: tuple[float, float, float]
    aot_residuals: tuple[float, float, float]

    def as_row(self) -> dict[str, float]:
        row = dict(zip(LGI_NAMES, self.l))
        row.update(zip(WLGI_NAMES, self.w))
        row["N"] = self.nsit_n
        row.update(zip(NSIT_NAMES, self.nsit_residuals))
        row.update(zip(AOT_NAMES, self.aot_residuals))
        return {k: float(v) for k, v in row.items()}


def macro_report(params: MesonParams, flavor: Flavor, t: float, outcomes=DEFAULT_OUTCOMES) -> MacroReport:
    return MacroReport(
        t=float(t),
        l=tuple(float(v) for v in lgi_values(params, flavor, t)),
        w=tuple(float(v) for v in wlgi_values(params, flavor, t, outcomes)),
        nsit_n=float(nsit_value(params, flavor, t)),
        nsit_residuals=tuple(float(v) for v in nsit_residuals(params, flavor, t, outcomes)),
        aot_residuals=tuple(float(v) for v in aot_residuals(params, flavor, t, outcomes)),
    )


@dataclass(frozen=True)
class Extremum:
    min: float
    argmin: float
    max: float
    argmax: float


@dataclass(frozen=True)
class ScanSeries:
    params: MesonParams
    flavor: Flavor
    grid: np.ndarray
    reports: list[MacroReport]
    summary: dict[str, Extremum] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name not in QUANTITIES:
            raise KeyError(f"unknown quantity {name!r}")
        return np.array([r.as_row()[name] for r in self.reports])


def _summarize(grid: np.ndarray, reports: list[MacroReport]) -> dict[str, Extremum]:
    rows = [r.as_row() for r in reports]
    summary = {}
    for name in QUANTITIES:
        col = np.array([row[name] for row in rows])
        lo, hi = int(np.argmin(col)), int(np.argmax(col))
        summary[name] = Extremum(float(col[lo]), float(grid[lo]), float(col[hi]), float(grid[hi]))
    return summary


def scan(params: MesonParams, flavor: Flavor, t_min: float, t_max: float, n_points: int,
         outcomes=DEFAULT_OUTCOMES, workers: int = 1) -> ScanSeries:
    """Full reports on a uniform grid with both endpoints included."""
    if not (0 <= t_min < t_max) or not math.isfinite(t_max):
        raise ValueError(f"invalid time range [{t_min}, {t_max}]")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    grid = np.linspace(t_min, t_max, n_points)

    def one(t):
        return macro_report(params, flavor, t, outcomes)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, grid))
    else:
        reports = [one(t) for t in grid]
    return ScanSeries(params, flavor, grid, reports, _summarize(grid, reports))


def violation_intervals(series: ScanSeries, quantity: str, threshold: float = 1e-9) -> list[tuple[float, float]]:
    """Maximal runs of grid points where ``quantity`` violates its macrorealist bound.

    L1..L4 violate below -threshold, W1..W3 above +threshold, N when |N| > threshold.
    """
    values = series.column(quantity) if quantity in LGI_NAMES + WLGI_NAMES + ("N",) else None
    if values is None:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of L1..L4, W1..W3, N")
    if quantity.startswith("L"):
        bad = values < -threshold
    elif quantity.startswith("W"):
        bad = values > threshold
    else:
        bad = np.abs(values) > threshold

    intervals = []
    start = None
    for i, flag in enumerate(bad):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append((float(series.grid[start]), float(series.grid[i - 1])))
            start = None
    if start is not None:
        intervals.append((float(series.grid[start]), float(series.grid[-1])))
    return intervals


def sign_changes(values: np.ndarray, floor: float = 0.0) -> int:
    """Sign changes in a sampled series, ignoring points with |value| <= floor."""
    s = np.sign(values[np.abs(values) > floor])
    return int(np.count_nonzero(s[1:] != s[:-1]))
