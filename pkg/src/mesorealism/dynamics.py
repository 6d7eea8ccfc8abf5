"""Time evolution of a decaying two-level meson system.

Two independent routes are provided:

* closed-form Wigner-Weisskopf probabilities and amplitudes, and
* a GKLS master equation on the flavor + decay space (basis order
  |K_S>, |K_L>, |d_S>, |d_L>), integrated with fixed-step classical RK4.

All matrices are written in the mass basis. With m_S = 0 and m_L = mass_split,
the flavor kets are |F> = (|K_S> + s|K_L>)/sqrt(2) with s = +1 for the particle
and s = -1 for the antiparticle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .params import Flavor, MesonParams, component_widths, validate


class DynamicsError(ValueError):
    pass


class StateError(DynamicsError):
    """An ExtendedState violates hermiticity, normalization or positivity."""


def _check_dt(dt) -> None:
    if np.any(np.asarray(dt) < 0):
        raise DynamicsError("elapsed time must be non-negative")


def _unbox(a: np.ndarray):
    # 0-d results come back as numpy scalars so long double survives
    return a[()] if a.ndim == 0 else a


def _damped_sinh_sq(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """exp(-x) * sinh(u)**2 for |u| <= x/2, without overflow at large x."""
    out = np.empty(np.broadcast(x, u).shape, dtype=np.result_type(x, u))
    x, u = np.broadcast_arrays(x, u)
    small = np.abs(u) < 1
    xs, us = x[small], u[small]
    out[small] = (np.exp(-0.5 * xs) * np.sinh(us)) ** 2
    xl, ul = x[~small], u[~small]
    # exponents are <= 0 because |u| <= x/2
    out[~small] = (0.5 * (np.exp(ul - 0.5 * xl) - np.exp(-ul - 0.5 * xl))) ** 2
    return out


def _scaled(params: MesonParams, dt):
    dt = np.asarray(dt)
    _check_dt(dt)
    x = params.gamma_mean * dt
    y = params.gamma_split * dt
    z = params.mass_split * dt
    return x, y, z


def survival_prob(params: MesonParams, dt, flavor: Flavor = Flavor.PARTICLE):
    """P(F -> F) after elapsed time ``dt`` (seconds; scalar or array).

    Written as exp(-x) (sinh^2(y/4) + cos^2(z/2)) in the scaled variables
    x = Gamma dt, y = dGamma dt, z = dm dt, which equals
    exp(-Gamma dt)/2 (cosh(dGamma dt/2) + cos(dm dt)) with no cancellation.
    The result does not depend on ``flavor`` or on the CP parameter.
    """
    x, y, z = _scaled(params, dt)
    p = _damped_sinh_sq(x, 0.25 * y) + np.exp(-x) * np.cos(0.5 * z) ** 2
    return _unbox(np.asarray(p))


def cp_ratio(params: MesonParams, source: Flavor) -> float:
    """Asymmetry factor multiplying the oscillation probability out of ``source``."""
    eps = complex(params.cp_epsilon)
    r = abs(1 - eps) / abs(1 + eps)
    return r if source is Flavor.PARTICLE else 1.0 / r


def oscillation_prob(params: MesonParams, dt, source: Flavor = Flavor.PARTICLE):
    """P(F -> conj F) after elapsed time ``dt``, including the CP asymmetry factor.

    At cp_epsilon = 0 the factor is exactly 1 and both directions reduce to
    exp(-Gamma dt)/2 (cosh(dGamma dt/2) - cos(dm dt)), evaluated here as
    exp(-x) (sinh^2(y/4) + sin^2(z/2)), which is exactly zero at dt = 0.
    """
    x, y, z = _scaled(params, dt)
    p = _damped_sinh_sq(x, 0.25 * y) + np.exp(-x) * np.sin(0.5 * z) ** 2
    return _unbox(np.asarray(cp_ratio(params, source) * p))


def transition_prob(params: MesonParams, source: Flavor, target: Flavor, dt):
    if source is target:
        return survival_prob(params, dt, source)
    return oscillation_prob(params, dt, source)


@dataclass(frozen=True)
class Amplitudes:
    """Mass-basis amplitudes f_S, f_L of the evolved state."""

    f_S: complex
    f_L: complex

    def flavor_amplitude(self, flavor: Flavor) -> complex:
        return (self.f_S + flavor.mass_sign * self.f_L) / math.sqrt(2)

    @property
    def norm_sq(self) -> float:
        return abs(self.f_S) ** 2 + abs(self.f_L) ** 2


def wwa_amplitudes(params: MesonParams, initial: Flavor, dt: float) -> Amplitudes:
    """Amplitudes f_i = <psi0|K_i> exp(-(i m_i + Gamma_i/2) dt) for a flavor eigenstate."""
    _check_dt(dt)
    if params.cp_epsilon != 0:
        raise DynamicsError("amplitude evolution is only defined for cp_epsilon = 0")
    g_s, g_l = component_widths(params)
    c = 1 / math.sqrt(2)
    f_s = c * complex(math.exp(-0.5 * g_s * dt))
    f_l = initial.mass_sign * c * complex(
        math.exp(-0.5 * g_l * dt) * math.cos(params.mass_split * dt),
        -math.exp(-0.5 * g_l * dt) * math.sin(params.mass_split * dt),
    )
    return Amplitudes(f_s, f_l)


# ---------------------------------------------------------------------------
# GKLS route


def flavor_ket(flavor: Flavor, dim: int = 4, dtype=np.complex128) -> np.ndarray:
    """|F> in the mass basis, padded with zeros on the decay block when dim = 4."""
    real = np.empty(0, dtype=dtype).real.dtype.type
    ket = np.zeros(dim, dtype=dtype)
    ket[0] = 1
    ket[1] = flavor.mass_sign
    return ket / np.sqrt(real(2))


def flavor_projector(flavor: Flavor, dim: int = 4, dtype=np.complex128) -> np.ndarray:
    """|F><F|, built from exact halves so that it is idempotent to the last bit."""
    pr = np.zeros((dim, dim), dtype=dtype)
    pr[:2, :2] = 0.5
    pr[0, 1] = pr[1, 0] = 0.5 * flavor.mass_sign
    return pr


def decay_projector(dtype=np.complex128) -> np.ndarray:
    pd = np.zeros((4, 4), dtype=dtype)
    pd[2, 2] = pd[3, 3] = 1
    return pd


@dataclass(frozen=True)
class ExtendedState:
    """Density matrix on flavor (+) decay space, basis |K_S>, |K_L>, |d_S>, |d_L>."""

    rho: np.ndarray

    @classmethod
    def from_flavor(cls, flavor: Flavor, dtype=np.complex128) -> "ExtendedState":
        return cls(flavor_projector(flavor, 4, dtype))

    @property
    def flavor_block(self) -> np.ndarray:
        return self.rho[:2, :2]

    @property
    def coherence_block(self) -> np.ndarray:
        return self.rho[:2, 2:]

    @property
    def decay_block(self) -> np.ndarray:
        return self.rho[2:, 2:]

    def expect(self, projector: np.ndarray):
        return np.trace(projector @ self.rho).real

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10, psd_tol: float = 1e-9) -> "ExtendedState":
        rho = self.rho
        if rho.shape != (4, 4):
            raise StateError(f"expected a 4x4 matrix, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise StateError("non-finite entries in state")
        if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
            raise StateError("state is not Hermitian")
        if abs(np.trace(rho) - 1) > trace_tol:
            raise StateError(f"trace {np.trace(rho).real!r} differs from 1")
        h = 0.5 * (rho + rho.conj().T)
        if np.linalg.eigvalsh(h.astype(np.complex128)).min() < -psd_tol:
            raise StateError("state has a negative eigenvalue")
        return self


@dataclass(frozen=True)
class GklsGenerators:
    """Mass operator and jump operator of the GKLS equation on the 4-dim space.

    ``mass_op`` is diag(0, dm) on the flavor block; ``jump_op`` has only the
    decay <- flavor block B = diag(sqrt(Gamma_S), sqrt(Gamma_L)).
    """

    mass_op: np.ndarray
    jump_op: np.ndarray
    params: MesonParams = field(compare=False)

    @property
    def decay_rate_op(self) -> np.ndarray:
        """B^dagger B (flavor block equals diag(Gamma_S, Gamma_L))."""
        return self.jump_op.conj().T @ self.jump_op

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Right-hand side of the master equation for one 4x4 density matrix."""
        m, b, g = self.mass_op, self.jump_op, self.decay_rate_op
        return -1j * (m @ rho - rho @ m) - 0.5 * (g @ rho + rho @ g) + b @ rho @ b.conj().T

    @cached_property
    def liouvillian(self) -> np.ndarray:
        """16x16 matrix L with vec(rhs(rho)) = L vec(rho), row-major vec."""
        m, b, g = self.mass_op, self.jump_op, self.decay_rate_op
        eye = np.eye(4, dtype=m.dtype)
        return (
            -1j * (np.kron(m, eye) - np.kron(eye, m.T))
            - 0.5 * (np.kron(g, eye) + np.kron(eye, g.T))
            + np.kron(b, b.conj())
        )


def build_generators(params: MesonParams, dtype=np.complex128) -> GklsGenerators:
    """GKLS generators whose flavor block reproduces H = M - (i/2) Gamma.

    ``dtype`` may be np.clongdouble to run the oracle in extended precision.
    """
    validate(params)
    if params.cp_epsilon != 0:
        raise DynamicsError("GKLS generators are only built for cp_epsilon = 0")
    real = np.empty(0, dtype=dtype).real.dtype.type
    g_s, g_l = (real(v) for v in component_widths(params))
    mass = np.zeros((4, 4), dtype=dtype)
    mass[1, 1] = real(params.mass_split)
    jump = np.zeros((4, 4), dtype=dtype)
    jump[2, 0] = np.sqrt(g_s)
    jump[3, 1] = np.sqrt(g_l)
    return GklsGenerators(mass, jump, params)


def _n_steps(dt: float, step: float) -> int:
    if not step > 0:
        raise DynamicsError("integration step must be positive")
    if dt == 0:
        return 0
    # tolerate dt/step landing a few ulp above an integer
    return max(1, math.ceil(float(dt / step) * (1 - 1e-12)))


def propagate(gen: GklsGenerators, rhos: np.ndarray, dt: float, step: float) -> np.ndarray:
    """RK4-integrate a batch of density matrices (shape (..., 4, 4)) over ``dt``.

    Uses n = ceil(dt/step) equal steps of size dt/n so the endpoint is hit exactly.
    """
    _check_dt(dt)
    n = _n_steps(dt, step)
    rhos = np.asarray(rhos)
    if not np.all(np.isfinite(rhos)):
        raise DynamicsError("non-finite state entries")
    if n == 0:
        return rhos.copy()
    batch = rhos.shape[:-2]
    lv = gen.liouvillian
    y = rhos.reshape(-1, 16).T.astype(lv.dtype)
    h = lv.real.dtype.type(dt) / n
    half = h / 2
    for _ in range(n):
        k1 = lv @ y
        k2 = lv @ (y + half * k1)
        k3 = lv @ (y + half * k2)
        k4 = lv @ (y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    out = y.T.reshape(*batch, 4, 4)
    if not np.all(np.isfinite(out)):
        raise DynamicsError("integration produced non-finite entries")
    return out


def default_step(params: MesonParams, divisor: int = 2000) -> float:
    return params.lifetime_unit / divisor


def gkls_evolve(gen: GklsGenerators, state: ExtendedState, dt: float, step: float) -> ExtendedState:
    """Evolve ``state`` by ``dt`` seconds under the GKLS equation with fixed-step RK4."""
    if not step > 0:
        raise DynamicsError("integration step must be positive")
    if not np.all(np.isfinite(state.rho)):
        raise DynamicsError("non-finite state entries")
    out = ExtendedState(propagate(gen, state.rho, dt, step))
    return out.check()


def flavor_propagate_exact(params: MesonParams, rho_f: np.ndarray, dt: float) -> np.ndarray:
    """Closed-form flavor-block propagation U rho_f U^dagger, U = exp(-i H_eff dt).

    H_eff = diag(-i Gamma_S/2, dm - i Gamma_L/2) in the mass basis. The dtype of
    ``rho_f`` is preserved.
    """
    _check_dt(dt)
    rho_f = np.asarray(rho_f)
    cdtype = np.result_type(rho_f.dtype, np.complex128)
    real = np.empty(0, dtype=cdtype).real.dtype.type
    g_s, g_l = component_widths(params)
    t = real(dt)
    u = np.array(
        [
            np.exp(-real(g_s) * t / 2),
            np.exp(-real(g_l) * t / 2) * (np.cos(real(params.mass_split) * t) - 1j * np.sin(real(params.mass_split) * t)),
        ],
        dtype=cdtype,
    )
    return u[:, None] * rho_f * u.conj()[None, :]
