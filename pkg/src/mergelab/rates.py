"""Closed-form rate quantities and the geometry of the achievable (E, C) region.

Rates are per copy: ``E`` in ebits, ``C`` in coherence bits.  Both may be
negative (resources gained).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .info import von_neumann_entropy
from .qstate import TOL, LayoutError, PureState, State, as_density, dephase, partial_trace, reduce_to
from .statezoo import SeparableFamily, flower

EXCLUDED = "excluded"
ACHIEVABLE = "achievable"
UNKNOWN = "unknown"

FLOWER_CAVEAT = (
    "coherence floor holds for one-way LQICC merging with exactly zero initial "
    "entanglement (E_i = 0 and delta = 0); it is not claimed for asymptotically vanishing entanglement"
)


@dataclass(frozen=True)
class ResourcePair:
    E: float
    C: float

    def __post_init__(self):
        if not (math.isfinite(self.E) and math.isfinite(self.C)):
            raise ValueError(f"resource pair must be finite, got ({self.E}, {self.C})")


@dataclass(frozen=True)
class RateBounds:
    """Bounds delimiting the achievable region of one state.

    ``e_min_binding`` says whether ``E >= e_min`` is a proven constraint.  It
    is for pure states; for a mixed ``rho^{RAB}`` the conditional entropy of
    ``rho^{AB}`` is reported but does not bound E (the separable family
    merges at zero entanglement while ``S(A|B) > 0``).
    """

    sum_lower: float
    e_min: float
    e0: Optional[float] = None
    c_max: Optional[float] = None
    e_min_binding: bool = True

    def __post_init__(self):
        if self.sum_lower < -TOL:
            raise ValueError(f"sum bound {self.sum_lower} is negative")
        if self.e0 is not None and self.e_min_binding and self.e0 < self.e_min - TOL:
            raise ValueError(f"e0 = {self.e0} below e_min = {self.e_min}")

    def to_dict(self) -> dict:
        out = {"sum_lower": self.sum_lower, "e_min": self.e_min}
        if self.e0 is not None:
            out["e0"] = self.e0
        if self.c_max is not None:
            out["c_max"] = self.c_max
        return out


def _check_tripartite(rho: State):
    for label in ("R", "A", "B"):
        if label not in rho.layout:
            raise LayoutError(f"rate quantities need factors R, A, B; missing {label!r}")


def ec_sum_lower_bound(rho: State) -> float:
    """``S(id^R x Delta^{AB}[rho]) - S(id^{RA} x Delta^B[rho])``, a lower bound on E + C."""
    _check_tripartite(rho)
    rho = reduce_to(rho, ["R", "A", "B"])
    val = von_neumann_entropy(dephase(rho, ["A", "B"])) - von_neumann_entropy(dephase(rho, ["B"]))
    return 0.0 if abs(val) < 1e-12 else val


def e_min(rho: State) -> float:
    """Conditional entropy ``S(rho^{AB}) - S(rho^B)``."""
    _check_tripartite(rho)
    rho_ab = reduce_to(rho, ["A", "B"])
    return von_neumann_entropy(rho_ab) - von_neumann_entropy(partial_trace(rho_ab, ["A"]))


def e0_pure(psi: PureState) -> float:
    """Entanglement rate of the incoherent merging protocol, ``S(Delta rho^{AB}) - S(Delta rho^B)``."""
    if not isinstance(psi, PureState):
        raise TypeError("e0 is defined for pure global states; got a density operator")
    _check_tripartite(psi)
    rho_ab = reduce_to(psi, ["A", "B"])
    dab = dephase(rho_ab, ["A", "B"])
    db = dephase(partial_trace(rho_ab, ["A"]), ["B"])
    return von_neumann_entropy(dab) - von_neumann_entropy(db)


def compute_bounds(rho: State) -> RateBounds:
    pure = isinstance(rho, PureState)
    if not pure:
        # a rank-one density operator is a pure state in disguise
        lam = as_density(rho).eigenvalues()
        if lam[-1] > 1 - 1e-12:
            pure = True
    emin = e_min(rho)
    if pure:
        psi = rho if isinstance(rho, PureState) else _dominant_vector(rho)
        return RateBounds(ec_sum_lower_bound(rho), emin, e0=e0_pure(psi))
    return RateBounds(ec_sum_lower_bound(rho), emin, e_min_binding=False)


def _dominant_vector(rho) -> PureState:
    lam, vecs = np.linalg.eigh(rho.matrix)
    return PureState(rho.layout, vecs[:, -1])


def _anchors(bounds: RateBounds):
    pts = []
    if bounds.e0 is not None:
        pts.append((bounds.e0, 0.0))
    if bounds.c_max is not None:
        pts.append((bounds.e_min, bounds.c_max))
    return pts


def classify_pair(pair: ResourcePair, bounds: RateBounds, tol: float = TOL) -> str:
    """``excluded``, ``achievable`` or ``unknown``.

    Excluded: below the sum bound, or left of ``e_min`` where that bound is
    proven.  Achievable: inside the region generated from the known anchors
    ``(e0, 0)`` and ``(e_min, c_max)`` by timesharing between them, adding
    resources, and trading an ebit for a coherence bit, i.e. the convex hull
    of the anchors plus the cone ``{(u, v): u >= 0, u + v >= 0}``.
    """
    E, C = pair.E, pair.C
    if E + C < bounds.sum_lower - tol:
        return EXCLUDED
    if bounds.e_min_binding and E < bounds.e_min - tol:
        return EXCLUDED
    anchors = _anchors(bounds)
    if not anchors:
        return UNKNOWN
    if len(anchors) == 1:
        (a_e, a_c), = anchors
        ok = E >= a_e - tol and E + C >= a_e + a_c - tol
        return ACHIEVABLE if ok else UNKNOWN
    (e1, c1), (e2, c2) = anchors
    # need lam in [0, 1] with E >= Q_E(lam) and E + C >= Q_S(lam), Q = lam*a1 + (1-lam)*a2
    lo, hi = 0.0, 1.0
    for p_val, q1, q2 in ((E, e1, e2), (E + C, e1 + c1, e2 + c2)):
        # p_val >= q2 + lam*(q1 - q2)
        slope, rhs = q1 - q2, p_val - q2 + tol
        if abs(slope) < 1e-15:
            if rhs < 0:
                return UNKNOWN
        elif slope > 0:
            hi = min(hi, rhs / slope)
        else:
            lo = max(lo, rhs / slope)
    return ACHIEVABLE if lo <= hi + 1e-15 else UNKNOWN


def timeshare(p1: ResourcePair, p2: ResourcePair, p: float) -> ResourcePair:
    if not 0 <= p <= 1:
        raise ValueError(f"timesharing weight {p!r} outside [0, 1]")
    return ResourcePair(p * p1.E + (1 - p) * p2.E, p * p1.C + (1 - p) * p2.C)


def separable_c_max(fam: SeparableFamily) -> float:
    """``sum_ij p_ij S(Delta(psi_ij))``, summed in row-major (i, j) order."""
    total = 0.0
    ni, nj = fam.p.shape
    for i in range(ni):
        for j in range(nj):
            total += fam.p[i, j] * _diag_entropy_vec(fam.states[i, j])
    return total


def _diag_entropy_vec(v) -> float:
    q = np.abs(np.asarray(v)) ** 2
    q = q[q >= 1e-12]
    return float(-np.sum(q * np.log2(q))) if q.size else 0.0


def separable_family_rates(p, states=None):
    """``(c_max, frontier)`` for the separable family.

    ``frontier(a)`` is the optimal pair ``(a c_max, (1 - a) c_max)`` for
    ``a >= 0``; calling ``frontier()`` with no argument yields pairs over
    ``a = 0, 0.1, ..., 1`` for quick plotting.
    """
    fam = p if isinstance(p, SeparableFamily) else SeparableFamily(p, states)
    c = separable_c_max(fam)

    def frontier(a=None):
        if a is None:
            return (frontier(x) for x in np.linspace(0, 1, 11))
        if a < 0:
            raise ValueError("frontier parameter must be >= 0")
        return ResourcePair(a * c, (1 - a) * c)

    return c, frontier


def separable_bounds(fam: SeparableFamily) -> RateBounds:
    """Bounds for the separable family: zero entanglement suffices, so ``e_min = 0``."""
    from .statezoo import separable_family_state

    rho = separable_family_state(fam)
    c = separable_c_max(fam)
    return RateBounds(ec_sum_lower_bound(rho), 0.0, c_max=c)


@dataclass(frozen=True)
class FlowerRates:
    bounds: RateBounds
    theorem3_coherence_floor: float
    caveat: str = field(default=FLOWER_CAVEAT)

    def to_dict(self) -> dict:
        out = self.bounds.to_dict()
        out["coherence_floor"] = self.theorem3_coherence_floor
        out["caveat"] = self.caveat
        return out


def flower_rates(d: int) -> FlowerRates:
    """Analytic flower values: ``e0 = 1``, ``e_min = 0``, zero-entanglement floor ``1 + log2(d)/2``."""
    if int(d) != d or d < 2:
        raise ValueError(f"flower state needs d >= 2, got {d!r}")
    return FlowerRates(RateBounds(1.0, 0.0, e0=1.0), 1 + 0.5 * math.log2(d))


def flower_rates_numeric(d: int) -> RateBounds:
    """Same bounds recomputed from the explicit flower state."""
    return compute_bounds(flower(d))


# -- region export --------------------------------------------------------------


def parse_axis(spec: str):
    """``"E:-1:3:0.05"`` -> ("E", -1.0, 3.0, 0.05)."""
    try:
        name, lo, hi, step = spec.split(":")
        lo, hi, step = float(lo), float(hi), float(step)
    except ValueError:
        raise ValueError(f"grid axis {spec!r} is not NAME:LO:HI:STEP") from None
    if name not in ("E", "C"):
        raise ValueError(f"grid axis name must be E or C, got {name!r}")
    if not hi >= lo or step <= 0:
        raise ValueError(f"grid axis {spec!r} needs LO <= HI and STEP > 0")
    return name, lo, hi, step


def axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def region_grid(bounds: RateBounds, e_axis, c_axis, tol: float = TOL) -> Iterator[tuple]:
    for e in axis_values(*e_axis):
        for c in axis_values(*c_axis):
            yield float(e), float(c), classify_pair(ResourcePair(float(e), float(c)), bounds, tol)


def region_csv(bounds: RateBounds, e_axis, c_axis, tol: float = TOL) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["E", "C", "classification"])
    for e, c, label in region_grid(bounds, e_axis, c_axis, tol):
        w.writerow([repr(e), repr(c), label])
    return buf.getvalue()
