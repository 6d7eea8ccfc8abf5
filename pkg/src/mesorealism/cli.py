"""Command-line front end.

Times on the command line and in CSV output are in units of the species'
lifetime_unit; everything below the interface works in seconds.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import macro, proba
from .params import Flavor, MesonParams, RegistryError, load_registry
from .significance import PseudoConfig, SignificanceError, significance

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
VERIFY_LIMIT = 1e-6

# (tmin, tmax, points) per command when not given on the command line
GRID_DEFAULTS = {
    "probs": (0.0, 10.0, 2001),
    "figures": (0.0, 10.0, 2001),
    "scan": (0.0, 10.0, 2001),
    "verify": (0.0, 5.0, 20),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunSpec:
    command: str
    particle: MesonParams
    flavor: Flavor
    t_min: float
    t_max: float
    n_points: int
    out: str
    step_div: int
    threshold: float

    @property
    def tau(self) -> float:
        return self.particle.lifetime_unit

    def grid_seconds(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_points) * self.tau


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")


def cmd_probs(spec: RunSpec, args) -> int:
    p, f = spec.particle, spec.flavor
    grid = spec.grid_seconds()
    surv = dyn.survival_prob(p, grid, f)
    fwd = dyn.oscillation_prob(p, grid, f)
    bwd = dyn.oscillation_prob(p, grid, f.conj)
    rows = zip(grid / spec.tau, surv, fwd, bwd)
    _write_csv(spec.out, ["t_over_tau", "P_surv", "P_osc_fwd", "P_osc_bwd"], rows)
    return EXIT_OK


def _nsit_rows(p: MesonParams, f: Flavor, t_min, t_max, n):
    x = np.linspace(t_min, t_max, n)
    return zip(x, macro.nsit_value(p, f, x * p.lifetime_unit))


def cmd_figures(spec: RunSpec, args) -> int:
    out = Path("." if spec.out == "-" else spec.out)
    out.mkdir(parents=True, exist_ok=True)
    p, f = spec.particle, spec.flavor
    grid = spec.grid_seconds()
    x = grid / spec.tau
    ls = macro.lgi_values(p, f, grid)
    ws = macro.wlgi_values(p, f, grid)
    _write_csv(str(out / "lgi.csv"), ["t_over_tau", *macro.LGI_NAMES], zip(x, *ls))
    _write_csv(str(out / "wlgi.csv"), ["t_over_tau", "W1", "W2"], zip(x, ws[0], ws[1]))
    _write_csv(str(out / "nsit.csv"), ["t_over_tau", "N"], _nsit_rows(p, f, spec.t_min, spec.t_max, spec.n_points))
    for other in args.compare or []:
        q = _lookup(args.registry_entries, other)
        _write_csv(str(out / f"nsit_{q.name}.csv"), ["t_over_tau", "N"],
                   _nsit_rows(q, f, spec.t_min, spec.t_max, spec.n_points))
    return EXIT_OK


def verify_discrepancies(particle: MesonParams, flavor: Flavor, grid, step: float) -> dict[str, float]:
    """Largest absolute disagreement between each analytic/oracle pair on ``grid`` (seconds)."""
    worst = {"joint2": 0.0, "joint3": 0.0, "flavor_block": 0.0}
    gen = dyn.build_generators(particle)
    start = dyn.ExtendedState.from_flavor(flavor)
    for t in grid:
        t = float(t)
        a2 = proba.joint2(particle, flavor, t, t).p
        o2 = proba.joint2_oracle(particle, flavor, t, t, step).p
        worst["joint2"] = max(worst["joint2"], float(np.max(np.abs(a2 - o2))))
        a3 = proba.joint3(particle, flavor, 0.0, t, 2 * t).p
        o3 = proba.joint3_oracle(particle, flavor, 0.0, t, 2 * t, step).p
        worst["joint3"] = max(worst["joint3"], float(np.max(np.abs(a3 - o3))))
        exact = dyn.flavor_propagate_exact(particle, start.flavor_block, t)
        num = dyn.gkls_evolve(gen, start, t, step).flavor_block
        worst["flavor_block"] = max(worst["flavor_block"], float(np.max(np.abs(exact - num))))
    return worst


def cmd_verify(spec: RunSpec, args) -> int:
    step = spec.tau / spec.step_div
    worst = verify_discrepancies(spec.particle, spec.flavor, spec.grid_seconds(), step)
    failed = False
    for name, value in worst.items():
        status = "ok" if value <= VERIFY_LIMIT else "FAIL"
        failed |= value > VERIFY_LIMIT
        print(f"{name:<14s} max_abs_discrepancy={value:.3e} {status}")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_scan(spec: RunSpec, args) -> int:
    series = macro.scan(spec.particle, spec.flavor, spec.t_min * spec.tau, spec.t_max * spec.tau, spec.n_points)
    rows = ([r.t / spec.tau, *(r.as_row()[q] for q in macro.QUANTITIES)] for r in series.reports)
    _write_csv(spec.out, ["t_over_tau", *macro.QUANTITIES], rows)
    stream = sys.stderr if spec.out == "-" else sys.stdout
    print(f"# scan {spec.particle.name} {spec.flavor.value} t/tau in [{spec.t_min}, {spec.t_max}], "
          f"{spec.n_points} points", file=stream)
    for name in macro.QUANTITIES:
        e = series.summary[name]
        print(f"{name:<12s} min={e.min: .6e} at t/tau={e.argmin / spec.tau:.6g}  "
              f"max={e.max: .6e} at t/tau={e.argmax / spec.tau:.6g}", file=stream)
    n = series.column("N")
    k = int(np.argmax(np.abs(n)))
    print(f"max|N|={abs(n[k]):.6e} at t/tau={series.grid[k] / spec.tau:.6g}", file=stream)
    for name in macro.LGI_NAMES + macro.WLGI_NAMES + ("N",):
        spans = macro.violation_intervals(series, name, spec.threshold)
        print(f"violations {name}: {len(spans)} interval(s)", file=stream)
    return EXIT_OK


def cmd_significance(spec: RunSpec, args) -> int:
    cfg = PseudoConfig(t=args.t * spec.tau, rel_sigma=args.rel_sigma, n_trials=args.trials, seed=args.seed)
    print(significance(spec.particle, spec.flavor, cfg).to_json())
    return EXIT_OK


COMMANDS = {
    "probs": cmd_probs,
    "figures": cmd_figures,
    "verify": cmd_verify,
    "scan": cmd_scan,
    "significance": cmd_significance,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--particle", default="K0", help="registry entry name")
    common.add_argument("--flavor", choices=["particle", "antiparticle"], default="particle")
    common.add_argument("--tmin", type=float, default=None, help="grid start in units of tau")
    common.add_argument("--tmax", type=float, default=None, help="grid end in units of tau")
    common.add_argument("--points", type=int, default=None)
    common.add_argument("--out", default=None, help="output file ('-' for stdout) or directory for figures")
    common.add_argument("--step-div", type=int, default=2000, help="oracle step = tau / step-div")
    common.add_argument("--threshold", type=float, default=1e-9)
    common.add_argument("--registry", default=None, help="registry file (default: shipped presets)")

    parser = _Parser(prog="mesorealism", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("probs", parents=[common], help="survival/oscillation probabilities CSV")
    fig = sub.add_parser("figures", parents=[common], help="lgi.csv, wlgi.csv, nsit.csv")
    fig.add_argument("--compare", action="append", metavar="NAME",
                     help="also write nsit_<NAME>.csv for another registry entry")
    sub.add_parser("verify", parents=[common], help="analytic vs GKLS oracle discrepancies")
    sub.add_parser("scan", parents=[common], help="full macrorealism report on a grid")
    sig = sub.add_parser("significance", parents=[common], help="pseudo-experiment z-score of N(t)")
    sig.add_argument("--t", type=float, default=1.0, help="time in units of tau")
    sig.add_argument("--seed", type=int, default=42)
    sig.add_argument("--trials", type=int, default=100_000)
    sig.add_argument("--rel-sigma", type=float, default=0.01)
    return parser


def _lookup(entries: list[MesonParams], name: str) -> MesonParams:
    for p in entries:
        if p.name == name:
            return p
    raise UsageError(f"unknown particle {name!r}; known: {', '.join(e.name for e in entries)}")


def _spec(args) -> RunSpec:
    t_min, t_max, points = GRID_DEFAULTS.get(args.command, (0.0, 1.0, 2))
    t_min = t_min if args.tmin is None else args.tmin
    t_max = t_max if args.tmax is None else args.tmax
    points = points if args.points is None else args.points
    if args.command == "verify":
        if not 0 <= t_min <= t_max or points < 1:
            raise UsageError("verify grid needs 0 <= tmin <= tmax and points >= 1")
    elif args.command != "significance" and (not 0 <= t_min < t_max or points < 2):
        raise UsageError("grid needs 0 <= tmin < tmax and points >= 2")
    if args.step_div < 1:
        raise UsageError("--step-div must be a positive integer")
    default_out = {"figures": ".", "scan": "scan.csv"}.get(args.command, "-")
    return RunSpec(
        command=args.command,
        particle=_lookup(args.registry_entries, args.particle),
        flavor=Flavor(args.flavor),
        t_min=t_min,
        t_max=t_max,
        n_points=points,
        out=default_out if args.out is None else args.out,
        step_div=args.step_div,
        threshold=args.threshold,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.registry_entries = load_registry(args.registry)
        spec = _spec(args)
        return COMMANDS[args.command](spec, args)
    except (UsageError, SignificanceError) as exc:
        print(f"mesorealism: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RegistryError as exc:
        print(f"mesorealism: registry error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mesorealism: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except dyn.DynamicsError as exc:
        print(f"mesorealism: verification error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
