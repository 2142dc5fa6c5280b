"""Sweeps, behavior classification, sudden changes, zero-T limits and high-T fits.

A sweep varies one axis (T, r1, r2 or jz) with everything else held fixed and
returns an ordered table of Q, U, F with their active branches.  The remaining
functions read such tables or evaluate limits from the effective parameters.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .correlations import (
    Branch,
    BranchPair,
    correlations,
    discord,
    high_t_coefficients,
    lqfi,
    lqu,
)
from .model import (
    LEVEL_TOL,
    Couplings,
    DomainError,
    EffectiveParams,
    ThermalXState,
    bell_levels,
    effective_params,
    gibbs_state,
)

AXES = ("T", "r1", "r2", "jz")
MEASURES = ("Q", "U", "F")

EPS0 = 1e-6
# how close the lowest-T value must be to 1 or 1/3 for types I, II and IV
START_TOL = 1e-2
MIN_CURVE_POINTS = 50
MAX_CURVE_TMIN = 1e-2
SLOPE_JUMP_FACTOR = 10.0
REGION_TOL = 1e-9
ZERO_T_PROBES = (1e-4, 1e-5)
ZERO_T_TOL = 1e-3
# levels closer than this to the ground energy (but not degenerate) make the
# finite-T probes useless, so the numerical cross-check is skipped
ZERO_T_MIN_SEPARATION = 1e-3
CLASSICAL_TOL = 1e-9
ASYMPTOTE_FACTOR = 10.0
C2_TOL = 0.02
C3_TOL = 0.10
# below this many rows a process pool costs more than it saves
PARALLEL_MIN_ROWS = 20000


class SpecError(ValueError):
    """Invalid sweep specification."""


class ClassificationError(ValueError):
    """Curve too coarse, too short, or of no recognized shape."""


class ConsistencyError(RuntimeError):
    """Analytic region logic and a numerical cross-check disagree."""


class PreconditionError(ValueError):
    """Inputs violate the documented precondition of a check."""


# ---------------------------------------------------------------------------
# parallel map


def thread_count() -> int:
    """Worker cap from SPINCORR_THREADS; 0 or unset means all cores."""
    raw = os.environ.get("SPINCORR_THREADS", "").strip()
    cores = os.cpu_count() or 1
    if not raw:
        return cores
    try:
        n = int(raw)
    except ValueError:
        return cores
    return cores if n <= 0 else n


def parallel_map(fn, items: Sequence, min_rows: int = PARALLEL_MIN_ROWS) -> list:
    """Ordered map; uses a process pool for large inputs.

    The output order follows ``items`` regardless of worker count, so results
    do not depend on parallelism.
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1 or len(items) < min_rows:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """One-axis sweep.

    ``fixed`` holds every parameter; the ``vary`` component is overwritten
    along the grid.  Axes other than T need the fixed temperature ``t``.
    Grids are log-spaced on the T axis unless ``log`` says otherwise.
    """

    fixed: Union[EffectiveParams, Couplings]
    vary: str
    range: Tuple[float, float, int]
    measures: Tuple[str, ...] = MEASURES
    t: Optional[float] = None
    log: Optional[bool] = None

    def __post_init__(self):
        if self.vary not in AXES:
            raise SpecError(f"unknown axis {self.vary!r}; expected one of {AXES}")
        lo, hi, steps = self.range
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise SpecError("sweep range needs min < max")
        if int(steps) != steps or steps < 2:
            raise SpecError("sweep needs at least 2 steps")
        if self.vary == "T" and lo <= 0:
            raise SpecError("temperature axis must stay above 0")
        if self.vary in ("r1", "r2") and lo < 0:
            raise SpecError(f"{self.vary} must be non-negative")
        if self.vary != "T":
            if self.t is None or not self.t > 0:
                raise SpecError("a positive fixed temperature is required off the T axis")
        bad = [m for m in self.measures if m not in MEASURES]
        if bad or not self.measures:
            raise SpecError(f"measures must be a non-empty subset of {MEASURES}")
        if self.log and lo <= 0:
            raise SpecError("log spacing needs a positive range")

    def grid(self) -> np.ndarray:
        lo, hi, steps = self.range
        use_log = self.vary == "T" if self.log is None else self.log
        if use_log:
            g = np.geomspace(lo, hi, int(steps))
        else:
            g = np.linspace(lo, hi, int(steps))
        g[0], g[-1] = lo, hi
        return g


def default_t_range(p, steps: int = 500) -> Tuple[float, float, int]:
    """500 log-spaced points from 1e-2 up to 10 times the largest energy scale."""
    e = effective_params(p) if isinstance(p, Couplings) else p
    return (1e-2, 10.0 * max(1.0, abs(e.jz), e.r1, e.r2), steps)


@dataclass
class SweepTable:
    axis: str
    x: np.ndarray
    values: Dict[str, np.ndarray]
    branch0: Dict[str, np.ndarray]
    branch1: Dict[str, np.ndarray]
    active: Dict[str, List[Branch]]
    params: List[EffectiveParams] = field(default_factory=list)
    temperatures: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.x)

    def rows(self):
        for i, xv in enumerate(self.x):
            yield (float(xv),) + tuple(float(self.values[m][i]) for m in MEASURES if m in self.values) + tuple(
                self.active[m][i] for m in MEASURES if m in self.active
            )


def _point(args) -> Tuple[BranchPair, BranchPair, BranchPair]:
    p, t = args
    r = correlations(gibbs_state(p, t))
    return r.q, r.u, r.f


def _point_params(spec: SweepSpec, x: float):
    f = spec.fixed
    if spec.vary == "T":
        return f, x
    if spec.vary == "jz":
        if isinstance(f, Couplings):
            return replace(f, jz=x), spec.t
        return EffectiveParams(x, f.r1, f.r2), spec.t
    e = effective_params(f) if isinstance(f, Couplings) else f
    if spec.vary == "r1":
        return EffectiveParams(e.jz, x, e.r2), spec.t
    return EffectiveParams(e.jz, e.r1, x), spec.t


def sweep(spec: SweepSpec) -> SweepTable:
    """Evaluate Q, U, F along the grid; rows come back ordered by axis value."""
    grid = spec.grid()
    points = [_point_params(spec, float(x)) for x in grid]
    out = parallel_map(_point, points)
    tab = SweepTable(spec.vary, grid, {}, {}, {}, {})
    for k, m in enumerate(MEASURES):
        if m not in spec.measures:
            continue
        pairs = [row[k] for row in out]
        tab.values[m] = np.array([bp.value for bp in pairs])
        tab.branch0[m] = np.array([bp.branch0 for bp in pairs])
        tab.branch1[m] = np.array([bp.branch1 for bp in pairs])
        tab.active[m] = [bp.active for bp in pairs]
    tab.params = [effective_params(p) if isinstance(p, Couplings) else p for p, _ in points]
    tab.temperatures = np.array([t for _, t in points], dtype=float)
    return tab


def region(p: EffectiveParams, tol: float = REGION_TOL) -> str:
    """'Omega0' for r1 + r2 < 2|jz|, 'Omega1' above, 'boundary' within ``tol``."""
    d = p.r1 + p.r2 - 2.0 * abs(p.jz)
    if abs(d) <= tol:
        return "boundary"
    return "Omega0" if d < 0 else "Omega1"


# ---------------------------------------------------------------------------
# behavior types


@dataclass(frozen=True)
class Extremum:
    t: float
    value: float
    kind: str  # "min" or "max"


@dataclass(frozen=True)
class BehaviorType:
    kind: str  # "I", "II", "III", "IV"
    extrema: Tuple[Extremum, ...]
    start: float

    def first(self, kind: str) -> Optional[Extremum]:
        for e in self.extrema:
            if e.kind == kind:
                return e
        return None


def find_extrema(t: np.ndarray, values: np.ndarray, eps0: float = EPS0) -> List[Extremum]:
    """Interior extrema from sign changes of the first differences.

    Differences with magnitude <= eps0 count as flat and never start or end a
    monotone run.  The extremum is placed at the grid point where the sign
    flips.
    """
    d = np.diff(np.asarray(values, dtype=float))
    out = []
    last_sign, last_idx = 0, -1
    for i, di in enumerate(d):
        if abs(di) <= eps0:
            continue
        s = 1 if di > 0 else -1
        if last_sign and s != last_sign:
            # the turning point is the highest / lowest sample in the flat stretch
            seg = slice(last_idx + 1, i + 1)
            j = last_idx + 1 + int(np.argmax(values[seg]) if last_sign > 0 else np.argmin(values[seg]))
            out.append(Extremum(float(t[j]), float(values[j]), "max" if last_sign > 0 else "min"))
        last_sign, last_idx = s, i
    return out


def classify_behavior(
    t: Sequence[float], values: Sequence[float], eps0: float = EPS0, start_tol: float = START_TOL
) -> BehaviorType:
    """Assign a behavior type I-IV to one temperature curve.

    I: starts near 1, no interior extrema.  II: starts near 1, a local minimum
    followed by a local maximum.  III: starts at <= eps0 and has an interior
    maximum.  IV: starts near 1/3.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ClassificationError("temperature and value arrays must be 1-d and equal length")
    if len(t) < MIN_CURVE_POINTS:
        raise ClassificationError(f"curve too coarse: {len(t)} points, need {MIN_CURVE_POINTS}")
    if np.any(np.diff(t) <= 0):
        raise ClassificationError("temperatures must be strictly increasing")
    if t[0] > MAX_CURVE_TMIN:
        raise ClassificationError(f"curve must start at T <= {MAX_CURVE_TMIN}")

    ext = tuple(find_extrema(t, v, eps0))
    v0 = float(v[0])
    if abs(v0 - 1.0 / 3.0) <= start_tol:
        return BehaviorType("IV", ext, v0)
    if v0 <= eps0:
        if any(e.kind == "max" for e in ext):
            return BehaviorType("III", ext, v0)
        raise ClassificationError("curve starts at zero but never rises")
    if abs(v0 - 1.0) <= start_tol:
        if not ext:
            return BehaviorType("I", ext, v0)
        kinds = [e.kind for e in ext]
        if "min" in kinds and "max" in kinds[kinds.index("min"):]:
            return BehaviorType("II", ext, v0)
        raise ClassificationError(f"curve starts at 1 with unrecognized extrema {kinds}")
    raise ClassificationError(f"start value {v0:.6g} matches no behavior type")


@dataclass(frozen=True)
class Classification:
    per_measure: Dict[str, Union[BehaviorType, ClassificationError]]
    consensus: Optional[str]

    @property
    def agree(self) -> bool:
        return self.consensus is not None


def classify_table(tab: SweepTable, eps0: float = EPS0) -> Classification:
    """Classify each measure of a T sweep; consensus is None on disagreement."""
    if tab.axis != "T":
        raise ClassificationError("behavior types are defined on temperature curves")
    per: Dict[str, Union[BehaviorType, ClassificationError]] = {}
    for m in MEASURES:
        if m not in tab.values:
            continue
        try:
            per[m] = classify_behavior(tab.x, tab.values[m], eps0)
        except ClassificationError as exc:
            per[m] = exc
    kinds = {b.kind if isinstance(b, BehaviorType) else None for b in per.values()}
    consensus = kinds.pop() if len(kinds) == 1 else None
    return Classification(per, consensus)


# ---------------------------------------------------------------------------
# sudden changes


@dataclass(frozen=True)
class SuddenChange:
    measure: str
    axis_value: float
    jump: float  # right slope minus left slope
    kind: str  # "cusp" when the slope changes sign, else "kink"
    boundary: float  # analytic crossing of r1 + r2 = 2|jz|


def boundary_crossings(spec: SweepSpec) -> List[float]:
    """Axis values inside the sweep range where r1 + r2 = 2|jz|."""
    lo, hi, _ = spec.range
    e = effective_params(spec.fixed) if isinstance(spec.fixed, Couplings) else spec.fixed
    if spec.vary == "r1":
        cands = [2.0 * abs(e.jz) - e.r2]
    elif spec.vary == "r2":
        cands = [2.0 * abs(e.jz) - e.r1]
    elif spec.vary == "jz":
        s = (e.r1 + e.r2) / 2.0
        cands = [-s, s] if s > 0 else [0.0]
    else:
        raise SpecError("sudden changes are scanned along r1, r2 or jz")
    return sorted(c for c in cands if lo <= c <= hi)


def _flip_positions(active: List[Branch]) -> List[int]:
    """Indices i where the active branch differs between i and the next non-tie row."""
    out = []
    prev, prev_i = None, None
    for i, a in enumerate(active):
        if a is Branch.TIE:
            continue
        if prev is not None and a is not prev:
            out.append(prev_i)
        prev, prev_i = a, i
    return out


def detect_sudden_changes(spec: SweepSpec, factor: float = SLOPE_JUMP_FACTOR) -> List[SuddenChange]:
    """Derivative discontinuities where the active branch flips.

    An event is reported when the one-sided slopes around a flip differ by
    more than ``factor`` times the median slope difference over the sweep.
    Every event must sit within one grid step of an analytic crossing of
    r1 + r2 = 2|jz|; otherwise ConsistencyError is raised.
    """
    if spec.vary == "T":
        raise SpecError("sudden changes are scanned along r1, r2 or jz")
    tab = sweep(spec)
    x = tab.x
    step = float(np.max(np.diff(x)))
    analytic = boundary_crossings(spec)
    events: List[SuddenChange] = []
    for m in spec.measures:
        v = tab.values[m]
        slopes = np.diff(v) / np.diff(x)
        ds = np.abs(np.diff(slopes))
        base = float(np.median(ds)) if len(ds) else 0.0
        for i in _flip_positions(tab.active[m]):
            j = i + 1
            while tab.active[m][j] is Branch.TIE:
                j += 1
            # slopes taken strictly on either side of the crossing interval
            if i < 1 or j + 1 >= len(x):
                continue
            left = (v[i] - v[i - 1]) / (x[i] - x[i - 1])
            right = (v[j + 1] - v[j]) / (x[j + 1] - x[j])
            jump = float(right - left)
            if not abs(jump) > factor * base:
                continue
            # locate the crossing by linear interpolation of branch0 - branch1
            d_i = tab.branch0[m][i] - tab.branch1[m][i]
            d_j = tab.branch0[m][j] - tab.branch1[m][j]
            xc = float(x[i] - d_i * (x[j] - x[i]) / (d_j - d_i)) if d_j != d_i else float(x[i])
            near = [c for c in analytic if abs(c - xc) <= step + (x[j] - x[i])]
            if not near:
                raise ConsistencyError(f"{m}: branch flip at {xc:.6g} is off the analytic boundary {analytic}")
            kind = "cusp" if left * right < 0 else "kink"
            events.append(SuddenChange(m, xc, jump, kind, min(near, key=lambda c: abs(c - xc))))
    events.sort(key=lambda e: (e.axis_value, MEASURES.index(e.measure)))
    return events


# ---------------------------------------------------------------------------
# zero temperature


def ground_manifold(p: EffectiveParams) -> Tuple[int, ...]:
    """Indices (0..3 over Phi+, Psi+, Psi-, Phi-) of the degenerate ground levels."""
    lv = bell_levels(p)
    e0 = min(lv)
    tol = LEVEL_TOL * max(1.0, max(abs(e) for e in lv))
    return tuple(i for i, e in enumerate(lv) if e - e0 <= tol)


def _ground_state(p: EffectiveParams) -> ThermalXState:
    idx = ground_manifold(p)
    probs = tuple(1.0 / len(idx) if i in idx else 0.0 for i in range(4))
    p1, p2, p3, p4 = probs
    return ThermalXState(
        0.5 * (p1 + p4), 0.5 * (p2 + p3), 0.5 * (p1 - p4), 0.5 * (p2 - p3), math.inf, _probs=probs
    )


def _lowest_excitation(p: EffectiveParams) -> float:
    lv = sorted(bell_levels(p))
    tol = LEVEL_TOL * max(1.0, max(abs(e) for e in lv))
    above = [e - lv[0] for e in lv if e - lv[0] > tol]
    return min(above) if above else math.inf


def zero_t_measures(p: EffectiveParams, verify: bool = True) -> Tuple[float, float, float]:
    """(Q, U, F) in the T -> 0 limit.

    The limit state is the uniform mixture over the degenerate ground levels.
    With ``verify`` the thermal closed forms at T = 1e-4 and 1e-5 must agree
    with it within 1e-3; the check is skipped when an excited level sits
    within 1e-3 of the ground energy, where those temperatures are not yet in
    the limit.
    """
    if isinstance(p, Couplings):
        p = effective_params(p)
    g = _ground_state(p)
    lim = (discord(g).value, lqu(g).value, lqfi(g).value)
    if verify and _lowest_excitation(p) >= ZERO_T_MIN_SEPARATION:
        for t in ZERO_T_PROBES:
            r = correlations(gibbs_state(p, t))
            got = (r.q.value, r.u.value, r.f.value)
            dev = max(abs(a - b) for a, b in zip(got, lim))
            if dev > ZERO_T_TOL:
                raise ConsistencyError(
                    f"zero-T limit {lim} disagrees with T={t} values {got} (deviation {dev:.3g})"
                )
    return lim


def zero_t_limit(p: EffectiveParams, verify: bool = True) -> float:
    """T -> 0 value shared by Q, U and F (0, 1/3 or 1 for this model)."""
    q, u, f = zero_t_measures(p, verify)
    if max(q, u, f) - min(q, u, f) > ZERO_T_TOL:
        raise ConsistencyError(f"zero-T measures differ: Q={q}, U={u}, F={f}")
    return u


# ---------------------------------------------------------------------------
# classical states


def classical_state_check(p: EffectiveParams, t: float, tol: float = CLASSICAL_TOL) -> bool:
    """True iff Q, U and F are all below ``tol`` at temperature t (t = 0 uses the limit)."""
    if t == 0:
        vals = zero_t_measures(p, verify=False)
    else:
        if not t > 0:
            raise DomainError("temperature must be non-negative")
        r = correlations(gibbs_state(p, t))
        vals = (r.q.value, r.u.value, r.f.value)
    return all(v < tol for v in vals)


# ---------------------------------------------------------------------------
# high temperature


@dataclass(frozen=True)
class AsymptoteRow:
    branch: str
    c2: float
    c3: float
    fit_c2: float
    fit_c3: float
    err_c2: float  # relative; absolute when the analytic value is 0
    err_c3: float
    active: bool  # branch wins min{.0, .1} at high T

    @property
    def c2_ok(self) -> bool:
        return self.err_c2 <= C2_TOL

    @property
    def c3_ok(self) -> bool:
        return self.err_c3 <= C3_TOL


@dataclass(frozen=True)
class AsymptoteReport:
    params: EffectiveParams
    t_values: Tuple[float, ...]
    rows: Tuple[AsymptoteRow, ...]
    notes: Tuple[str, ...]

    @property
    def c2_ok(self) -> bool:
        return all(r.c2_ok for r in self.rows)

    @property
    def c3_ok(self) -> bool:
        return all(r.c3_ok for r in self.rows)

    def row(self, branch: str) -> AsymptoteRow:
        for r in self.rows:
            if r.branch == branch:
                return r
        raise KeyError(branch)


def _err(fit: float, exact: float) -> float:
    return abs(fit - exact) / abs(exact) if exact != 0 else abs(fit)


def fit_high_t(t_values: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """Least-squares (c2, c3) of values ~ c2/T^2 + c3/T^3 + c4/T^4.

    The 1/T^4 term is a nuisance parameter: without it the truncation error
    leaks into c3 at order c4/T.
    """
    t = np.asarray(t_values, dtype=float)
    y = np.asarray(values, dtype=float) * t**2
    a = np.stack([np.ones_like(t), 1.0 / t, 1.0 / t**2], axis=1)
    coef = np.linalg.lstsq(a, y, rcond=None)[0]
    return float(coef[0]), float(coef[1])


def asymptote_check(p: EffectiveParams, t_values: Sequence[float]) -> AsymptoteReport:
    """Fit every branch at high T and compare with the analytic coefficients."""
    if isinstance(p, Couplings):
        p = effective_params(p)
    ts = tuple(float(t) for t in t_values)
    floor = ASYMPTOTE_FACTOR * max(abs(p.jz), p.r1, p.r2)
    if len(set(ts)) < 3:
        raise PreconditionError("need at least 3 distinct temperatures")
    if any(not t >= floor or not t > 0 for t in ts):
        raise PreconditionError(f"all temperatures must be >= 10*max(|jz|, r1, r2) = {floor:g}")

    res = [correlations(gibbs_state(p, t)) for t in ts]
    data = {
        "Q0": [r.q.branch0 for r in res], "Q1": [r.q.branch1 for r in res],
        "U0": [r.u.branch0 for r in res], "U1": [r.u.branch1 for r in res],
        "F0": [r.f.branch0 for r in res], "F1": [r.f.branch1 for r in res],
    }
    coeffs = high_t_coefficients(p)
    winner = "0" if p.r1 + p.r2 < 2.0 * abs(p.jz) else "1"
    rows, notes = [], []
    for name, (c2, c3) in coeffs.items():
        f2, f3 = fit_high_t(ts, data[name])
        active = name.endswith(winner)
        rows.append(AsymptoteRow(name, c2, c3, f2, f3, _err(f2, c2), _err(f3, c3), active))
        if active and c2 == 0:
            notes.append(f"{name} is active and its leading coefficient vanishes (classical line)")
    if coeffs["U0"][1] == 0:
        notes.append("odd coefficient c3 vanishes; its error is reported as an absolute deviation")
    return AsymptoteReport(p, ts, tuple(rows), tuple(notes))
