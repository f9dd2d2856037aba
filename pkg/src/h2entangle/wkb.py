"""Semiclassical nuclear phases.

The phase accumulated by the nuclei on a curve V(R) at total energy E is the
action integral of the local momentum p(R) = sqrt(2 mu (E - V(R))) (hbar = 1,
a.u.) from an inner limit out to a truncation radius.  Individually these
phases grow without bound with the truncation radius; only the difference
between the ground-state (GS) and bond-softening (BS) paths is physical, and
it is computed as one integral of p_gs - p_bs so the common tail cancels.

Quadrature is adaptive composite Gauss-Legendre over the interpolation
intervals of the curves.  Next to a classical turning point the substitution
R = R_t +- u**2 turns the square-root endpoint behaviour into a smooth
integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.optimize import brentq

from .constants import HARTREE_EV, IONISATION_LIMIT_EV, NUCLEAR_REDUCED_MASS
from .potentials import PotentialCurve

Curve = Union[PotentialCurve, Callable[[np.ndarray], np.ndarray]]

DEFAULT_R_MAX = 40.0
TAIL_TOLERANCE = 1e-3  # rad, change of delta-theta when r_max is doubled
_WINDOW_STEPS = 10
_CALLABLE_SAMPLES = 4000

_GL_LOW = np.polynomial.legendre.leggauss(8)
_GL_HIGH = np.polynomial.legendre.leggauss(16)


class NoTurningPoint(ValueError):
    """E - V has a constant sign over the searched range."""


class ToleranceNotMet(RuntimeError):
    """Adaptive refinement exhausted its interval budget."""


class NotConverged(RuntimeError):
    """Delta-theta changed by more than the tail tolerance when r_max doubled."""


@dataclass(frozen=True)
class WkbPath:
    """One nuclear path: curve, total energy (eV) and integration limits (a.u.)."""

    curve: Curve
    total_energy: float
    r_start: float
    r_max: float = DEFAULT_R_MAX
    mass: float = NUCLEAR_REDUCED_MASS

    def __post_init__(self):
        if not self.r_start < self.r_max:
            raise ValueError("r_start must be below r_max")

    def with_r_max(self, r_max: float) -> "WkbPath":
        return WkbPath(self.curve, self.total_energy, self.r_start, r_max, self.mass)

    def momentum(self, r):
        """Local nuclear momentum in a.u.; zero where classically forbidden."""
        ke = (self.total_energy - _eval(self.curve, r)) / HARTREE_EV
        return np.sqrt(2.0 * self.mass * np.clip(ke, 0.0, None))


@dataclass(frozen=True)
class PhaseResult:
    phase: float
    estimated_error: float
    r_turning: float


@dataclass(frozen=True)
class DeltaTheta:
    value: float
    estimated_error: float
    tail_change: float  # |dTheta(r_max) - dTheta(2 r_max)|
    converged: bool | None  # None when the doubling check was skipped


def _eval(curve: Curve, r):
    return curve(np.asarray(r, dtype=float))


def _nodes(curve: Curve, a: float, b: float) -> np.ndarray:
    """Sampling abscissae in [a, b]: interpolation nodes or a dense grid."""
    if isinstance(curve, PotentialCurve):
        r = curve.r_grid
        inner = r[(r > a) & (r < b)]
        return np.concatenate([[a], inner, [b]])
    return np.linspace(a, b, _CALLABLE_SAMPLES + 1)


def _spacing(curve: Curve, r: float) -> float:
    if isinstance(curve, PotentialCurve):
        g = curve.r_grid
        i = int(np.clip(np.searchsorted(g, r), 1, len(g) - 1))
        return float(g[i] - g[i - 1])
    return np.inf


def _roots(curve: Curve, energy: float, a: float, b: float) -> list[float]:
    """All sign changes of E - V(R) in [a, b], polished to |V - E| < 1e-8 eV."""
    x = _nodes(curve, a, b)
    f = energy - _eval(curve, x)
    roots = []
    for i in range(len(x) - 1):
        if f[i] == 0.0:
            roots.append(float(x[i]))
        elif f[i] * f[i + 1] < 0:
            def g(r):
                return float(energy - _eval(curve, r))
            roots.append(brentq(g, x[i], x[i + 1], xtol=1e-14, rtol=1e-15, maxiter=200))
    if f[-1] == 0.0:
        roots.append(float(x[-1]))
    return roots


def turning_point(curve: Curve, energy: float, r_lo: float | None = None,
                  r_hi: float | None = None) -> float:
    """Innermost classical turning point where motion becomes allowed outward.

    This is the smallest R at which E - V(R) changes from negative to
    positive, i.e. the repulsive inner wall the outgoing nuclei leave from.

    Raises:
        NoTurningPoint: if E - V does not change sign from - to + in range.
    """
    if isinstance(curve, PotentialCurve):
        r_lo = curve.r_min if r_lo is None else r_lo
        r_hi = curve.r_max if r_hi is None else r_hi
    elif r_lo is None or r_hi is None:
        raise ValueError("r_lo and r_hi are required for callable curves")
    x = _nodes(curve, r_lo, r_hi)
    f = energy - _eval(curve, x)
    idx = np.flatnonzero((f[:-1] <= 0) & (f[1:] > 0))
    if idx.size == 0:
        raise NoTurningPoint(f"E = {energy} eV never rises above V on [{r_lo}, {r_hi}] a.u.")
    i = idx[0]
    if f[i] == 0.0:
        return float(x[i])

    def g(r):
        return float(energy - _eval(curve, r))

    return float(brentq(g, x[i], x[i + 1], xtol=1e-14, rtol=1e-15, maxiter=200))


def _gauss(func, lo: np.ndarray, hi: np.ndarray, rule) -> np.ndarray:
    x, w = rule
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = func(pts.ravel()).reshape(pts.shape)
    return half * (vals @ w)


def adaptive_gauss(func, edges, tol: float, max_intervals: int = 200_000) -> tuple[float, float]:
    """Integrate a vectorised ``func`` over consecutive ``edges``.

    Each interval is estimated by 16-point Gauss-Legendre; the difference to
    the 8-point rule is its error estimate.  Intervals whose estimate exceeds
    their length-proportional share of ``tol`` are bisected.

    Returns:
        (integral, estimated_error)

    Raises:
        ToleranceNotMet: if more than ``max_intervals`` intervals are needed.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    total_len = float(np.sum(hi - lo))
    if total_len == 0.0:
        return 0.0, 0.0
    result = 0.0
    error = 0.0
    n_used = 0
    while lo.size:
        n_used += lo.size
        if n_used > max_intervals:
            raise ToleranceNotMet(f"adaptive quadrature exceeded {max_intervals} intervals")
        q_hi = _gauss(func, lo, hi, _GL_HIGH)
        q_lo = _gauss(func, lo, hi, _GL_LOW)
        err = np.abs(q_hi - q_lo)
        # 0.5 safety factor so the summed estimate stays below tol
        ok = err <= 0.5 * tol * (hi - lo) / total_len
        # stop splitting below double-precision resolution of the abscissa
        ok |= (hi - lo) <= 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi))
        result += float(np.sum(q_hi[ok]))
        error += float(np.sum(err[ok]))
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return result, error


def _piece_integral(terms, a: float, b: float, left_tp: bool, right_tp: bool, tol: float):
    """Integral of sum(sign * p) over one piece whose ends may be turning points."""

    def integrand(r):
        total = np.zeros_like(r)
        for sign, path in terms:
            active = r >= path.r_start
            if np.any(active):
                total = total + sign * np.where(active, path.momentum(np.where(active, r, path.r_start)), 0.0)
        return total

    grid = np.unique(np.concatenate([_nodes(p.curve, a, b) for _, p in terms]))
    h = min(_spacing(p.curve, 0.5 * (a + b)) for _, p in terms)
    if not np.isfinite(h):
        h = (b - a) / _CALLABLE_SAMPLES
    window = min(_WINDOW_STEPS * h, 0.5 * (b - a)) if (left_tp or right_tp) else 0.0
    lo_plain = a + window if left_tp else a
    hi_plain = b - window if right_tp else b
    share = tol / 3.0
    total = 0.0
    err = 0.0
    if hi_plain > lo_plain:
        edges = np.concatenate([[lo_plain], grid[(grid > lo_plain) & (grid < hi_plain)], [hi_plain]])
        v, e = adaptive_gauss(integrand, edges, share)
        total += v
        err += e
    for is_tp, anchor, direction in ((left_tp, a, 1.0), (right_tp, b, -1.0)):
        if not is_tp or window == 0.0:
            continue
        inner = grid[(grid > a) & (grid < b)]
        inner = inner[np.abs(inner - anchor) < window]
        u_edges = np.sort(np.concatenate([[0.0, np.sqrt(window)], np.sqrt(np.abs(inner - anchor))]))

        def sub(u, anchor=anchor, direction=direction):
            return 2.0 * u * integrand(anchor + direction * u * u)

        v, e = adaptive_gauss(sub, u_edges, share)
        total += v
        err += e
    return total, err


def _integrate(terms, tol: float) -> tuple[float, float]:
    """Integrate sum(sign * p_path) from the smallest r_start to the common r_max."""
    a = min(p.r_start for _, p in terms)
    b = max(p.r_max for _, p in terms)
    tps = set()
    breaks = {a, b}
    for _, p in terms:
        breaks.add(p.r_start)
        for r in _roots(p.curve, p.total_energy, p.r_start, p.r_max):
            tps.add(r)
            breaks.add(r)
        if abs(p.total_energy - _eval(p.curve, p.r_start)) < 1e-8:
            tps.add(p.r_start)
    pts = sorted(breaks)
    total = 0.0
    err = 0.0
    n = len(pts) - 1
    for x0, x1 in zip(pts[:-1], pts[1:]):
        if x1 <= x0:
            continue
        v, e = _piece_integral(terms, x0, x1, x0 in tps, x1 in tps, tol / n)
        total += v
        err += e
    return total, err


def wkb_phase(path: WkbPath, tol: float = 1e-8) -> PhaseResult:
    """Action integral of p(R) from ``path.r_start`` to ``path.r_max``.

    Classically forbidden stretches contribute nothing.  ``r_turning`` is the
    innermost turning point at or beyond r_start (r_start itself if none).
    """
    phase, err = _integrate([(1.0, path)], tol)
    try:
        rt = turning_point(path.curve, path.total_energy, path.r_start, path.r_max)
    except NoTurningPoint:
        rt = path.r_start
    if path.r_start >= rt or abs(path.total_energy - _eval(path.curve, path.r_start)) < 1e-8:
        rt = path.r_start
    return PhaseResult(phase=max(phase, 0.0), estimated_error=err, r_turning=rt)


def delta_theta(gs_path: WkbPath, bs_path: WkbPath, tol: float = 1e-8,
                check: bool = True) -> DeltaTheta:
    """Theta_gs - Theta_bs as a single integral of p_gs - p_bs.

    The value at the paths' common r_max is returned; the same integral with
    r_max doubled provides the convergence check.

    Raises:
        NotConverged: if ``check`` and the tail change exceeds 1e-3 rad.
    """
    if gs_path.r_max != bs_path.r_max:
        raise ValueError("paths must share r_max")
    value, err = _integrate([(1.0, gs_path), (-1.0, bs_path)], tol)
    if not check:
        return DeltaTheta(value, err, float("nan"), None)
    r2 = 2.0 * gs_path.r_max
    gs2, bs2 = gs_path.with_r_max(r2), bs_path.with_r_max(r2)
    # only the added tail needs integrating
    tail, tail_err = _integrate([(1.0, WkbPath(gs2.curve, gs2.total_energy, gs_path.r_max, r2, gs2.mass)),
                                 (-1.0, WkbPath(bs2.curve, bs2.total_energy, bs_path.r_max, r2, bs2.mass))], tol)
    converged = abs(tail) <= TAIL_TOLERANCE
    if not converged:
        raise NotConverged(f"delta-theta changed by {tail:.3g} rad when r_max doubled to {r2}")
    return DeltaTheta(value, err, abs(tail), converged)


def ground_state_path(ker: float, vg: PotentialCurve, r_max: float = DEFAULT_R_MAX,
                      dissociation_limit: float = IONISATION_LIMIT_EV) -> WkbPath:
    """Path along 1s sigma_g at E = KER + I_d from the inner turning point."""
    e = dissociation_limit + ker
    return WkbPath(vg, e, turning_point(vg, e), r_max)


def bond_softening_path(ker: float, lower: PotentialCurve, photon_energy: float,
                        r_max: float = DEFAULT_R_MAX,
                        dissociation_limit: float = IONISATION_LIMIT_EV) -> WkbPath:
    """Path along the dressed lower curve with the same asymptotic KER.

    The dressed curve tends to I_d - hbar*omega, so the total energy is
    KER + I_d - hbar*omega; integration starts at its inner turning point.
    """
    e = dissociation_limit - photon_energy + ker
    return WkbPath(lower, e, turning_point(lower, e), r_max)


@dataclass(frozen=True, eq=False)
class DeltaThetaTable:
    """Delta-theta tabulated over KER and interpolated with a cubic spline."""

    ker: np.ndarray
    values: np.ndarray

    def __call__(self, ker):
        from scipy.interpolate import CubicSpline

        spline = getattr(self, "_spline", None)
        if spline is None:
            spline = CubicSpline(self.ker, self.values)
            object.__setattr__(self, "_spline", spline)
        k = np.clip(np.asarray(ker, dtype=float), self.ker[0], self.ker[-1])
        out = spline(k)
        return float(out) if out.ndim == 0 else out


def delta_theta_table(vg: PotentialCurve, lower: PotentialCurve, photon_energy: float,
                      ker_grid=None, r_max: float = DEFAULT_R_MAX,
                      dissociation_limit: float = IONISATION_LIMIT_EV,
                      tol: float = 1e-8) -> DeltaThetaTable:
    """Delta-theta(KER) for the ground-state and dressed bond-softening paths."""
    kers = np.linspace(0.005, 2.5, 250) if ker_grid is None else np.asarray(ker_grid, float)
    vals = np.empty(kers.shape)
    for i, k in enumerate(kers):
        gs = ground_state_path(k, vg, r_max, dissociation_limit)
        bs = bond_softening_path(k, lower, photon_energy, r_max, dissociation_limit)
        vals[i] = delta_theta(gs, bs, tol).value
    return DeltaThetaTable(kers, vals)
