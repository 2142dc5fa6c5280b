"""Two-qubit XYZ chain with DM and KSEA couplings at thermal equilibrium.

The Hamiltonian is X-shaped in the computational basis, so the Gibbs state is
fixed by four real numbers (a, b, |u|, |v|) once local phases are removed.
Everything is evaluated from the four Boltzmann exponents with the largest one
factored out, which keeps T down to ~1e-4 (and far below) overflow free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

LN2 = math.log(2.0)

# relative tolerance used to decide whether two energy levels coincide
LEVEL_TOL = 1e-12


class DomainError(ValueError):
    """Raised for inputs outside the physical domain (e.g. T <= 0)."""


@dataclass(frozen=True)
class Couplings:
    """Raw Hamiltonian constants: exchange (jx, jy, jz), DM (dz), KSEA (gz)."""

    jx: float = 0.0
    jy: float = 0.0
    jz: float = 0.0
    dz: float = 0.0
    gz: float = 0.0

    def __post_init__(self):
        for name in ("jx", "jy", "jz", "dz", "gz"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"coupling {name} must be finite")


@dataclass(frozen=True)
class EffectiveParams:
    """The (jz, r1, r2) triple that fixes every correlation of the model."""

    jz: float
    r1: float
    r2: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.jz, self.r1, self.r2)):
            raise DomainError("effective parameters must be finite")
        if self.r1 < 0 or self.r2 < 0:
            raise DomainError("r1 and r2 must be non-negative")

    def mirrored(self) -> "EffectiveParams":
        """Parameters related by the local flip I (x) sigma_x: (jz, r1, r2) -> (-jz, r2, r1)."""
        return EffectiveParams(-self.jz, self.r2, self.r1)


@dataclass(frozen=True)
class Spectrum:
    e1: float
    e2: float
    e3: float
    e4: float
    gap: float

    @property
    def levels(self) -> Tuple[float, float, float, float]:
        return (self.e1, self.e2, self.e3, self.e4)

    @property
    def ground(self) -> float:
        return min(self.levels)


@dataclass(frozen=True)
class BellSpectrum:
    """Weights of the state on (Phi+, Psi+, Psi-, Phi-)."""

    p1: float
    p2: float
    p3: float
    p4: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.p1, self.p2, self.p3, self.p4)


@dataclass(frozen=True)
class ThermalXState:
    """X-shaped Gibbs state.

    ``u`` and ``v`` are the anti-diagonal entries.  They are non-negative reals
    when the state was built from effective parameters and carry the Hamiltonian
    phases when it was built from raw couplings.  The partition function is
    kept split as log Z = log_zs - beta * e0 (e0 the ground energy): Z itself
    overflows at low temperature and log Z alone cancels badly against beta*E.
    """

    a: float
    b: float
    u: complex
    v: complex
    beta: float
    e0: float = 0.0
    log_zs: float = math.log(4.0)
    params: Optional[EffectiveParams] = None
    # Bell weights straight from the Boltzmann factors; a - |u| would lose them
    # to cancellation once they drop below ~1e-16.
    _probs: Optional[Tuple[float, float, float, float]] = field(default=None, repr=False, compare=False)

    @property
    def log_z(self) -> float:
        return self.log_zs - self.beta * self.e0

    @property
    def z(self) -> float:
        try:
            return math.exp(self.log_z)
        except OverflowError:
            return math.inf

    @property
    def abs_u(self) -> float:
        return abs(self.u)

    @property
    def abs_v(self) -> float:
        return abs(self.v)

    @property
    def temperature(self) -> float:
        return math.inf if self.beta == 0 else 1.0 / self.beta


def effective_params(c: Couplings) -> EffectiveParams:
    r1 = math.hypot(c.jx - c.jy, 2.0 * c.gz)
    r2 = math.hypot(c.jx + c.jy, 2.0 * c.dz)
    return EffectiveParams(c.jz, r1, r2)


def _as_effective(p) -> EffectiveParams:
    return effective_params(p) if isinstance(p, Couplings) else p


def spectrum(p: EffectiveParams) -> Spectrum:
    p = _as_effective(p)
    e = (p.jz + p.r1, p.jz - p.r1, -p.jz + p.r2, -p.jz - p.r2)
    ordered = sorted(e)
    tol = LEVEL_TOL * max(1.0, max(abs(x) for x in e))
    gap = 0.0
    for level in ordered[1:]:
        if level - ordered[0] > tol:
            gap = level - ordered[0]
            break
    return Spectrum(*e, gap=gap)


def hamiltonian_matrix(c: Couplings) -> np.ndarray:
    """Dense 4x4 Hamiltonian in the basis |00>, |01>, |10>, |11>."""
    h = np.zeros((4, 4), dtype=complex)
    h[0, 0] = h[3, 3] = c.jz
    h[1, 1] = h[2, 2] = -c.jz
    h[0, 3] = complex(c.jx - c.jy, -2.0 * c.gz)
    h[3, 0] = np.conj(h[0, 3])
    h[1, 2] = complex(c.jx + c.jy, 2.0 * c.dz)
    h[2, 1] = np.conj(h[1, 2])
    return h


def bell_levels(p: EffectiveParams) -> Tuple[float, float, float, float]:
    """Energies of the Bell states Phi+, Psi+, Psi-, Phi- (the order of p1..p4)."""
    return (p.jz - p.r1, -p.jz - p.r2, -p.jz + p.r2, p.jz + p.r1)


def gibbs_state(p, t: float = None, *, beta: float = None) -> ThermalXState:
    """Thermal state at temperature ``t`` (or inverse temperature ``beta``).

    ``p`` may be :class:`EffectiveParams` (phase-free state) or
    :class:`Couplings` (complex u, v as produced by exp(-beta H)).
    ``beta=0`` gives the infinite-temperature state.
    """
    if beta is None:
        if t is None:
            raise TypeError("either t or beta is required")
        if not t > 0:
            raise DomainError("temperature must be positive")
        beta = 1.0 / t
    elif beta < 0 or not math.isfinite(beta):
        raise DomainError("temperature must be positive")

    eff = _as_effective(p)
    levels = bell_levels(eff)
    e0 = min(levels)
    w = [math.exp(-beta * (e - e0)) for e in levels]
    zs = math.fsum(w)
    probs = tuple(wi / zs for wi in w)
    p1, p2, p3, p4 = probs
    a = 0.5 * (p1 + p4)
    b = 0.5 * (p2 + p3)
    # (p1 - p4)/2 and (p2 - p3)/2 without cancellation when r is small
    au = -0.5 * p1 * math.expm1(-2.0 * beta * eff.r1)
    av = -0.5 * p2 * math.expm1(-2.0 * beta * eff.r2)

    u: complex = au
    v: complex = av
    if isinstance(p, Couplings):
        # phases of exp(-beta H) on the {00,11} and {01,10} blocks
        u = -complex(p.jx - p.jy, -2.0 * p.gz) / eff.r1 * au if eff.r1 > 0 else 0j
        v = -complex(p.jx + p.jy, 2.0 * p.dz) / eff.r2 * av if eff.r2 > 0 else 0j

    return ThermalXState(a, b, u, v, beta, e0, math.log(zs), eff, probs)


def bell_probs(s: ThermalXState) -> BellSpectrum:
    if s._probs is not None:
        return BellSpectrum(*s._probs)
    au, av = s.abs_u, s.abs_v
    return BellSpectrum(s.a + au, s.b + av, max(s.b - av, 0.0), max(s.a - au, 0.0))


def xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def entropy_bits(s: ThermalXState) -> float:
    """von Neumann entropy in bits, from the Bell weights."""
    return -math.fsum(xlog2x(p) for p in bell_probs(s).as_tuple())


def entropy_bits_closed(s: ThermalXState) -> float:
    """Same entropy via log Z and the mean energy (no eigenvalues involved)."""
    if s.params is None:
        raise ValueError("closed-form entropy needs the effective parameters")
    p = s.params
    # <E> - e0, written so the ground energy cancels term by term
    excess = -2.0 * (p.r1 * s.abs_u + s.a * (s.e0 - p.jz) + p.r2 * s.abs_v + s.b * (s.e0 + p.jz))
    return (s.log_zs + s.beta * excess) / LN2


def dense_matrix(s: ThermalXState, phases: Optional[Tuple[complex, complex]] = None, dtype=complex) -> np.ndarray:
    """Materialize the 4x4 density matrix.

    ``phases`` replaces the anti-diagonal entries' phases: the entries become
    ``|u| * phases[0]`` and ``|v| * phases[1]`` (each phase of modulus 1).
    With ``dtype=np.clongdouble`` the entries are rebuilt from the Bell weights
    in extended precision, so a - |u| and b - |v| survive even when tiny.
    """
    real = np.real(np.zeros(1, dtype=dtype)).dtype.type
    ph_u = s.u / s.abs_u if s.abs_u > 0 else 1.0
    ph_v = s.v / s.abs_v if s.abs_v > 0 else 1.0
    if phases is not None:
        ph_u, ph_v = phases
    p1, p2, p3, p4 = (real(x) for x in bell_probs(s).as_tuple())
    half = real(1) / 2
    a, b = half * (p1 + p4), half * (p2 + p3)
    au, av = half * (p1 - p4), half * (p2 - p3)
    u = au * np.asarray(ph_u, dtype=dtype)
    v = av * np.asarray(ph_v, dtype=dtype)
    rho = np.zeros((4, 4), dtype=dtype)
    rho[0, 0] = rho[3, 3] = a
    rho[1, 1] = rho[2, 2] = b
    rho[0, 3] = u
    rho[3, 0] = np.conj(u)
    rho[1, 2] = v
    rho[2, 1] = np.conj(v)
    return rho
