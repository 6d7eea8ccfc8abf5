"""Meson species parameters, flavor/outcome tags and the preset registry."""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable


class ParameterError(ValueError):
    """A MesonParams record violates one of its invariants."""


class RegistryError(ValueError):
    """The registry file could not be parsed or holds an invalid entry."""


class Flavor(enum.Enum):
    PARTICLE = "particle"
    ANTIPARTICLE = "antiparticle"

    @property
    def conj(self) -> "Flavor":
        return Flavor.ANTIPARTICLE if self is Flavor.PARTICLE else Flavor.PARTICLE

    @property
    def mass_sign(self) -> int:
        """Relative sign of the |K_L> component: |F> = (|K_S> + sign |K_L>)/sqrt(2)."""
        return 1 if self is Flavor.PARTICLE else -1


class Outcome(enum.Enum):
    """Dichotomic flavor measurement result: found in F (+1) or not (-1)."""

    F = 1
    NOT_F = -1

    @property
    def index(self) -> int:
        # row/column position in probability tables
        return 0 if self is Outcome.F else 1

    @property
    def flip(self) -> "Outcome":
        return Outcome.NOT_F if self is Outcome.F else Outcome.F


OUTCOMES = (Outcome.F, Outcome.NOT_F)


@dataclass(frozen=True)
class MesonParams:
    """Physical constants of one neutral-meson species.

    Rates are in s^-1 (mass_split with hbar = 1) and lifetime_unit in s.
    ``lifetime_unit`` only sets the time axis of reports; it is never
    derived from the widths.
    """

    name: str
    gamma_mean: float
    gamma_split: float
    mass_split: float
    lifetime_unit: float
    cp_epsilon: complex = 0j

    @property
    def gamma_short(self) -> float:
        return self.gamma_mean + 0.5 * self.gamma_split

    @property
    def gamma_long(self) -> float:
        return self.gamma_mean - 0.5 * self.gamma_split


def validate(params: MesonParams) -> MesonParams:
    """Return ``params`` unchanged if every invariant holds.

    Raises ParameterError naming the first violated invariant.
    """
    values = (params.gamma_mean, params.gamma_split, params.mass_split, params.lifetime_unit)
    if not all(math.isfinite(v) for v in values) or not _finite_complex(params.cp_epsilon):
        raise ParameterError(f"{params.name}: all parameters must be finite")
    if not params.gamma_mean > 0:
        raise ParameterError(f"{params.name}: gamma_mean > 0 violated (got {params.gamma_mean})")
    if abs(params.gamma_split) > 2 * params.gamma_mean:
        raise ParameterError(
            f"{params.name}: width positivity violated, |gamma_split| > 2*gamma_mean"
        )
    if not params.lifetime_unit > 0:
        raise ParameterError(f"{params.name}: lifetime_unit > 0 violated")
    if not abs(params.cp_epsilon) < 1:
        raise ParameterError(f"{params.name}: |cp_epsilon| < 1 violated")
    return params


def _finite_complex(z: complex) -> bool:
    z = complex(z)
    return math.isfinite(z.real) and math.isfinite(z.imag)


def component_widths(params: MesonParams) -> tuple[float, float]:
    """Widths (Gamma_S, Gamma_L) of the short- and long-lived mass eigenstates."""
    validate(params)
    # rounding can push a boundary value just below zero
    return max(params.gamma_short, 0.0), max(params.gamma_long, 0.0)


_REQUIRED = ("gamma_mean", "gamma_split", "mass_split", "lifetime_unit")
_OPTIONAL = ("cp_epsilon_re", "cp_epsilon_im")

DEFAULT_REGISTRY = "mesons.ini"


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=None,
        interpolation=None,
        default_section="\x00defaults",  # no implicit DEFAULT section
    )
    cp.optionxform = str  # keys are case-sensitive
    return cp


def parse_registry(text: str, source: str = "<string>") -> list[MesonParams]:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise RegistryError(f"{source}:{lineno}: cannot parse {line!r}") from exc
    except configparser.MissingSectionHeaderError as exc:
        raise RegistryError(f"{source}:{exc.lineno}: entry before any [name] header") from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise RegistryError(f"{source}:{exc.lineno}: {exc.message}") from exc

    entries = []
    for name in cp.sections():
        section = cp[name]
        unknown = set(section) - set(_REQUIRED) - set(_OPTIONAL)
        if unknown:
            raise RegistryError(f"entry {name!r}: unknown keys {sorted(unknown)}")
        missing = [k for k in _REQUIRED if k not in section]
        if missing:
            raise RegistryError(f"entry {name!r}: missing keys {missing}")
        try:
            nums = {k: float(section[k]) for k in section}
        except ValueError as exc:
            raise RegistryError(f"entry {name!r}: {exc}") from exc
        params = MesonParams(
            name=name,
            gamma_mean=nums["gamma_mean"],
            gamma_split=nums["gamma_split"],
            mass_split=nums["mass_split"],
            lifetime_unit=nums["lifetime_unit"],
            cp_epsilon=complex(nums.get("cp_epsilon_re", 0.0), nums.get("cp_epsilon_im", 0.0)),
        )
        try:
            validate(params)
        except ParameterError as exc:
            raise RegistryError(f"entry {name!r}: {exc}") from exc
        entries.append(params)
    return entries


def load_registry(path: str | Path | None = None) -> list[MesonParams]:
    """Read a registry file; ``None`` loads the presets shipped with the package."""
    if path is None:
        text = resources.files("mesorealism.data").joinpath(DEFAULT_REGISTRY).read_text("utf-8")
        return parse_registry(text, source=DEFAULT_REGISTRY)
    path = Path(path)
    return parse_registry(path.read_text(encoding="utf-8"), source=str(path))


def format_registry(entries: Iterable[MesonParams]) -> str:
    blocks = []
    for p in entries:
        eps = complex(p.cp_epsilon)
        blocks.append(
            "\n".join(
                [
                    f"[{p.name}]",
                    f"gamma_mean = {p.gamma_mean!r}",
                    f"gamma_split = {p.gamma_split!r}",
                    f"mass_split = {p.mass_split!r}",
                    f"lifetime_unit = {p.lifetime_unit!r}",
                    f"cp_epsilon_re = {eps.real!r}",
                    f"cp_epsilon_im = {eps.imag!r}",
                ]
            )
        )
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def write_registry(entries: Iterable[MesonParams], path: str | Path) -> None:
    Path(path).write_text(format_registry(entries), encoding="utf-8")


def get_params(name: str, registry: Iterable[MesonParams] | None = None) -> MesonParams:
    entries = load_registry() if registry is None else registry
    for p in entries:
        if p.name == name:
            return p
    raise KeyError(name)
