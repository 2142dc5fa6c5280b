"""Closed-form discord, local quantum uncertainty and local quantum Fisher information.

Each measure is the minimum of two branches.  Branch 0 belongs to a measurement
along z and is active for r1 + r2 < 2|jz|; branch 1 belongs to a measurement in
the xy plane and is active on the other side of that line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Tuple

from .model import (
    LN2,
    DomainError,
    EffectiveParams,
    ThermalXState,
    bell_probs,
    entropy_bits,
    xlog2x,
)

TIE_TOL = 1e-12
FORM_TOL = 1e-10
# terms of the Fisher sums whose denominator p_m + p_n falls below this are dropped
LQFI_FLOOR = 1e-300


class Branch(str, enum.Enum):
    ZERO = "0"
    ONE = "1"
    TIE = "tie"


@dataclass(frozen=True)
class BranchPair:
    branch0: float
    branch1: float
    active: Branch
    value: float

    @classmethod
    def of(cls, branch0: float, branch1: float) -> "BranchPair":
        # rounding can leave a branch a few ulp outside [0, 1]
        branch0 = min(max(branch0, 0.0), 1.0)
        branch1 = min(max(branch1, 0.0), 1.0)
        if abs(branch0 - branch1) <= TIE_TOL:
            return cls(branch0, branch1, Branch.TIE, branch0)
        if branch0 < branch1:
            return cls(branch0, branch1, Branch.ZERO, branch0)
        return cls(branch0, branch1, Branch.ONE, branch1)


@dataclass(frozen=True)
class CorrelationResult:
    q: BranchPair
    u: BranchPair
    f: BranchPair
    w_eigs: Tuple[float, float, float]
    m_eigs: Tuple[float, float, float]
    s_bits: float
    w_param: float


class FormMismatch(AssertionError):
    """The eigenvalue form and the hyperbolic form of W or M disagree."""


def _h2(x: float, y: float) -> float:
    """Binary entropy for the pair (x, y), x + y = 1, each clamped to [0, 1]."""
    x = min(max(x, 0.0), 1.0)
    y = min(max(y, 0.0), 1.0)
    return -(xlog2x(x) + xlog2x(y))


def _lse_split(coeffs, beta: float):
    """log sum exp(beta * c) as (max c, log-sum remainder)."""
    top = max(coeffs)
    return top, math.log(math.fsum(math.exp(beta * (c - top)) for c in coeffs))


def _cosh_pair_over_z(c: float, s: ThermalXState) -> float:
    # 2 cosh(beta*c) / Z with log Z = log_zs - beta*e0 never formed
    bt, e0, lzs = s.beta, s.e0, s.log_zs
    return math.exp(bt * (c + e0) - lzs) + math.exp(bt * (e0 - c) - lzs)


def w_eigs_pform(s: ThermalXState) -> Tuple[float, float, float]:
    r = [math.sqrt(p) for p in bell_probs(s).as_tuple()]
    return (
        2.0 * (r[0] * r[1] + r[2] * r[3]),
        2.0 * (r[0] * r[2] + r[1] * r[3]),
        2.0 * (r[0] * r[3] + r[1] * r[2]),
    )


def w_eigs_explicit(s: ThermalXState) -> Tuple[float, float, float]:
    p = s.params
    return (
        2.0 * _cosh_pair_over_z((p.r1 + p.r2) / 2.0, s),
        2.0 * _cosh_pair_over_z((p.r1 - p.r2) / 2.0, s),
        2.0 * _cosh_pair_over_z(p.jz, s),
    )


def _harmonic_term(pm: float, pn: float) -> float:
    den = pm + pn
    return 0.0 if den < LQFI_FLOOR else 4.0 * pm * pn / den


def m_eigs_pform(s: ThermalXState) -> Tuple[float, float, float]:
    p1, p2, p3, p4 = bell_probs(s).as_tuple()
    return (
        _harmonic_term(p1, p2) + _harmonic_term(p3, p4),
        _harmonic_term(p1, p3) + _harmonic_term(p2, p4),
        _harmonic_term(p1, p4) + _harmonic_term(p2, p3),
    )


def m_eigs_explicit(s: ThermalXState) -> Tuple[float, float, float]:
    p, bt, e0, lzs = s.params, s.beta, s.e0, s.log_zs
    # common numerator e^{beta jz} cosh(beta r1) + e^{-beta jz} cosh(beta r2)
    n_top, n_rest = _lse_split((p.jz + p.r1, p.jz - p.r1, p.r2 - p.jz, -p.jz - p.r2), bt)

    def ratio(d):
        d_top, d_rest = _lse_split((2 * p.jz, -2 * p.jz, d, -d), bt)
        return 4.0 * math.exp(bt * (n_top - d_top + e0) + n_rest - d_rest - lzs)

    def logcosh_rest(r):
        return math.log1p(math.exp(-2.0 * bt * r)) - LN2

    mzz = math.exp(
        bt * (n_top - p.r1 - p.r2 + e0) + n_rest - logcosh_rest(p.r1) - logcosh_rest(p.r2) - lzs
    )
    return ratio(p.r1 - p.r2), ratio(p.r1 + p.r2), mzz


def _eigs(s: ThermalXState, pform, explicit, check: bool):
    if s.params is None:
        return pform(s)
    fast = explicit(s)
    if check:
        slow = pform(s)
        dev = max(abs(x - y) for x, y in zip(fast, slow))
        if dev > FORM_TOL:
            raise FormMismatch(f"{explicit.__name__} vs {pform.__name__}: deviation {dev:.3e}")
    return fast


def w_eigs(s: ThermalXState, check: bool = False) -> Tuple[float, float, float]:
    """(W_xx, W_yy, W_zz); W is diagonal for these states."""
    return _eigs(s, w_eigs_pform, w_eigs_explicit, check)


def m_eigs(s: ThermalXState, check: bool = False) -> Tuple[float, float, float]:
    """(M_xx, M_yy, M_zz) of the Fisher-information matrix."""
    return _eigs(s, m_eigs_pform, m_eigs_explicit, check)


def w_parameter(s: ThermalXState) -> float:
    """w = 2(|u| + |v|), the xx correlation of the phase-free state."""
    p1, p2, p3, p4 = bell_probs(s).as_tuple()
    return (p1 + p2) - (p3 + p4)


def discord(s: ThermalXState) -> BranchPair:
    """Entropic discord (bits) with measurement on qubit A."""
    p1, p2, p3, p4 = bell_probs(s).as_tuple()
    ent = entropy_bits(s)
    a2, b2 = p1 + p4, p2 + p3  # 2a, 2b
    q0 = -ent - (xlog2x(a2) + xlog2x(b2)) + 1.0  # == -S - 2(a log2 a + b log2 b)
    q1 = 1.0 - ent + _h2(p1 + p2, p3 + p4)
    return BranchPair.of(q0, q1)


def lqu(s: ThermalXState, check: bool = False) -> BranchPair:
    wxx, _, wzz = w_eigs(s, check)
    return BranchPair.of(1.0 - wzz, 1.0 - wxx)


def lqfi(s: ThermalXState, check: bool = False) -> BranchPair:
    mxx, _, mzz = m_eigs(s, check)
    return BranchPair.of(1.0 - mzz, 1.0 - mxx)


def correlations(s: ThermalXState, check: bool = False) -> CorrelationResult:
    w = w_eigs(s, check)
    m = m_eigs(s, check)
    return CorrelationResult(
        q=discord(s),
        u=BranchPair.of(1.0 - w[2], 1.0 - w[0]),
        f=BranchPair.of(1.0 - m[2], 1.0 - m[0]),
        w_eigs=w,
        m_eigs=m,
        s_bits=entropy_bits(s),
        w_param=w_parameter(s),
    )


def ordering_check(s: ThermalXState, slack: float = 1e-9):
    """Return (U, Q, F, U <= Q, Q <= F) with the comparisons allowing ``slack``."""
    r = correlations(s)
    u, q, f = r.u.value, r.q.value, r.f.value
    return u, q, f, u <= q + slack, q <= f + slack


def branch_boundary(p: EffectiveParams) -> float:
    """Signed distance r1 + r2 - 2|jz|: negative in Omega0, positive in Omega1."""
    return p.r1 + p.r2 - 2.0 * abs(p.jz)


def discord_boundary_residual(s: ThermalXState) -> float:
    """ln2 + 2(a ln a + b ln b) - h_nat((1+w)/2); equals ln2 * (Q1 - Q0).

    Evaluated as h_nat(p1+p2, p3+p4) - h_nat(p1+p4, p2+p3), the same quantity
    with every argument taken from the Bell weights.  The literal form loses
    the residual to cancellation once it drops below ~1e-16, which at low T
    happens well inside one grid step of the root.
    """
    p1, p2, p3, p4 = bell_probs(s).as_tuple()

    def xlnx(x):
        return x * math.log(x) if x > 0 else 0.0

    return (xlnx(p1 + p4) + xlnx(p2 + p3)) - (xlnx(p1 + p2) + xlnx(p3 + p4))


def high_t_coefficients(p: EffectiveParams) -> Dict[str, Tuple[float, float]]:
    """Leading (1/T^2, 1/T^3) coefficients of every branch.

    Keys are ``Q0, Q1, U0, U1, F0, F1``.
    """
    jz, r1, r2 = p.jz, p.r1, p.r2
    odd = jz * (r2 * r2 - r1 * r1) / 4.0 + 0.0  # no signed zero
    even0 = (r1 * r1 + r2 * r2) / 4.0
    even1 = (4.0 * jz * jz + (r1 - r2) ** 2) / 8.0
    out = {
        "U0": (even0, odd),
        "U1": (even1, odd),
    }
    out["Q0"] = (even0 / LN2, odd / LN2)
    out["Q1"] = (even1 / LN2, odd / LN2)
    out["F0"] = (2.0 * even0, 2.0 * odd)
    out["F1"] = (2.0 * even1, 2.0 * odd)
    return {k: out[k] for k in ("Q0", "Q1", "U0", "U1", "F0", "F1")}


def jz0_closed_forms(r1: float, r2: float, t: float) -> Tuple[float, float]:
    """(U, F) at jz = 0: 1 - sech(x) and tanh(x)^2 with x = (r1 - r2)/(2T)."""
    if not t > 0:
        raise DomainError("temperature must be positive")
    x = abs(r1 - r2) / (2.0 * t)
    # 1 - sech(x) = 2 sinh^2(x/2) / cosh(x), written to avoid cancellation at small x
    sech = math.exp(-x) * 2.0 / (1.0 + math.exp(-2.0 * x))
    u_val = 2.0 * math.sinh(x / 2.0) ** 2 * sech if x < 20 else 1.0 - sech
    return u_val, math.tanh(x) ** 2
