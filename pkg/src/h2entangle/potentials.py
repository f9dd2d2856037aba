"""H2+ potential energy curves, IR-dressed (Floquet) curves and the
one-photon crossing geometry.

All energies are in eV on a scale whose zero is the neutral H2 ground state,
so that the 1s sigma_g dissociation asymptote sits at I_d = 18.1 eV.
Distances are in atomic units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .constants import HARTREE_EV, INTENSITY_AU, IONISATION_LIMIT_EV, IR_PHOTON_EV


class OutOfRange(ValueError):
    """Evaluation outside the tabulated internuclear-distance range."""


class NoCrossing(ValueError):
    """V_u - V_g never equals the photon energy on the grid."""


class CurveLabel(enum.Enum):
    GroundSigmaG = "1s_sigma_g"
    ExcitedSigmaU = "2p_sigma_u"
    DressedLower = "dressed_lower"
    DressedUpper = "dressed_upper"


@dataclass(frozen=True, eq=False)
class PotentialCurve:
    """Tabulated potential V(R) with monotone cubic (PCHIP) interpolation."""

    r_grid: np.ndarray
    v_grid: np.ndarray
    label: CurveLabel
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        v = np.asarray(self.v_grid, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("r_grid and v_grid must be 1-D of equal length >= 2")
        if np.any(np.diff(r) <= 0):
            raise ValueError("r_grid must be strictly increasing")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "v_grid", v)
        object.__setattr__(self, "_interp", PchipInterpolator(r, v, extrapolate=False))

    @property
    def r_min(self) -> float:
        return float(self.r_grid[0])

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    def __call__(self, r):
        return eval_curve(self, r)

    def derivative(self, r):
        return self._interp.derivative()(r)


def eval_curve(curve: PotentialCurve, r):
    """Interpolated energy (eV) at ``r``; exact at the grid nodes.

    Raises:
        OutOfRange: if any ``r`` lies outside the tabulated grid.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < curve.r_grid[0]) or np.any(r_arr > curve.r_grid[-1]) or np.any(np.isnan(r_arr)):
        raise OutOfRange(f"R outside [{curve.r_min}, {curve.r_max}] a.u.")
    out = curve._interp(r_arr)
    return float(out) if out.ndim == 0 else out


def load_curve(path, label: CurveLabel) -> PotentialCurve:
    """Read a two-column table (R in a.u., V in eV); '#' starts a comment."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
    return PotentialCurve(data[:, 0], data[:, 1], label)


def save_curve(curve: PotentialCurve, path) -> None:
    np.savetxt(path, np.column_stack([curve.r_grid, curve.v_grid]), fmt=["%.6f", "%.12f"],
               header=f"{curve.label.value}\ncolumns: R [a.u.]  V [eV]")


@lru_cache(maxsize=None)
def _embedded(label: CurveLabel) -> PotentialCurve:
    ref = resources.files("h2entangle") / "data" / f"h2plus_{label.value}.dat"
    with resources.as_file(ref) as p:
        return load_curve(p, label)


def embedded_curves() -> tuple[PotentialCurve, PotentialCurve]:
    """The bundled exact H2+ 1s sigma_g and 2p sigma_u curves (0.5-100 a.u.)."""
    return _embedded(CurveLabel.GroundSigmaG), _embedded(CurveLabel.ExcitedSigmaU)


def morse_curves(r_grid=None, *, well_depth: float = 2.79, r_eq: float = 2.0,
                 stiffness: float = 0.72, repulsion: float = 0.0) -> tuple[PotentialCurve, PotentialCurve]:
    """Analytic stand-ins for the H2+ pair.

    The ground curve is a Morse well D (1 - exp(-a (R - Re)))**2 - D and the
    excited curve its anti-Morse partner D/2 (exp(-2a(R-Re)) + 2 exp(-a(R-Re)))
    plus an optional extra ``repulsion`` * exp(-a (R - Re)).  Both tend to I_d.
    """
    r = np.linspace(0.5, 100.0, 4000) if r_grid is None else np.asarray(r_grid, float)
    x = np.exp(-stiffness * (r - r_eq))
    vg = IONISATION_LIMIT_EV + well_depth * (x**2 - 2 * x)
    vu = IONISATION_LIMIT_EV + 0.5 * well_depth * (x**2 + 2 * x) + repulsion * x
    return (PotentialCurve(r, vg, CurveLabel.GroundSigmaG),
            PotentialCurve(r, vu, CurveLabel.ExcitedSigmaU))


@dataclass(frozen=True)
class IrFieldParams:
    """Probe field; ``field_amplitude`` is E0 in atomic units."""

    photon_energy: float = IR_PHOTON_EV  # eV
    intensity: float = 2e11  # W/cm^2

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if not self.photon_energy > 0:
            raise ValueError("photon energy must be positive")

    @property
    def field_amplitude(self) -> float:
        return math.sqrt(self.intensity / INTENSITY_AU)


@dataclass(frozen=True)
class CouplingModel:
    """Transition dipole d(R) between 1s sigma_g and 2p sigma_u (a.u.).

    ``charge_resonance`` is d = R/2.  The linear growth never lets the dressed
    curves rejoin their diabatic asymptotes, so by default d is switched off
    with a cos**2 ramp between ``taper_start`` and ``taper_end``; set
    ``taper_end=None`` for the bare R/2 form.  ``constant`` uses ``d0``.
    """

    kind: str = "charge_resonance"
    d0: float = 1.0
    taper_start: float | None = 8.0
    taper_end: float | None = 20.0

    def __post_init__(self):
        if self.kind not in ("charge_resonance", "constant"):
            raise ValueError(f"unknown coupling model {self.kind!r}")
        if self.taper_end is not None and (self.taper_start is None or self.taper_end <= self.taper_start):
            raise ValueError("taper_end must exceed taper_start")

    def dipole(self, r):
        r = np.asarray(r, dtype=float)
        d = 0.5 * r if self.kind == "charge_resonance" else np.full_like(r, self.d0)
        if self.taper_end is not None:
            x = np.clip((r - self.taper_start) / (self.taper_end - self.taper_start), 0.0, 1.0)
            d = d * np.cos(0.5 * np.pi * x) ** 2
        return d


@dataclass(frozen=True, eq=False)
class DressedPair:
    lower: PotentialCurve
    upper: PotentialCurve
    crossing_radius_rf: float
    gap_width: float
    coupling: np.ndarray = field(repr=False)  # W(R) on the shared grid, eV


def crossing_radius(vg: PotentialCurve, vu: PotentialCurve, photon_energy: float) -> float:
    """Innermost R where V_u(R) - V_g(R) equals ``photon_energy``.

    A sign change of the difference is located on the union of both grids and
    polished by bisection to |f| < 1e-6 eV.
    """
    lo = max(vg.r_min, vu.r_min)
    hi = min(vg.r_max, vu.r_max)
    r = np.union1d(vg.r_grid, vu.r_grid)
    r = r[(r >= lo) & (r <= hi)]
    f = vu(r) - vg(r) - photon_energy
    if np.any(f == 0.0):
        return float(r[np.flatnonzero(f == 0.0)[0]])
    idx = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))
    if idx.size == 0:
        raise NoCrossing(f"V_u - V_g never equals {photon_energy} eV on [{lo}, {hi}] a.u.")
    i = idx[0]

    def g(x):
        return float(vu(x) - vg(x) - photon_energy)

    root = brentq(g, r[i], r[i + 1], xtol=1e-13, rtol=1e-15, maxiter=200)
    if abs(g(root)) >= 1e-6:
        raise NoCrossing("bisection did not converge")
    return float(root)


def dress_curves(vg: PotentialCurve, vu: PotentialCurve, ir: IrFieldParams,
                 coupling_model: CouplingModel | None = None) -> DressedPair:
    """Adiabatic curves of the two-state Floquet matrix.

    Diagonalises [[V_g, W], [W, V_u - hbar*omega]] pointwise with
    W(R) = d(R) E0 / 2 on the union of both grids.
    """
    coupling_model = coupling_model or CouplingModel()
    lo = max(vg.r_min, vu.r_min)
    hi = min(vg.r_max, vu.r_max)
    r = np.union1d(vg.r_grid, vu.r_grid)
    r = r[(r >= lo) & (r <= hi)]
    a = vg(r)
    b = vu(r) - ir.photon_energy
    w = coupling_model.dipole(r) * ir.field_amplitude / 2 * HARTREE_EV
    mean = 0.5 * (a + b)
    half = np.hypot(0.5 * (a - b), w)
    lower = mean - half
    upper = mean + half
    rf = crossing_radius(vg, vu, ir.photon_energy)
    w_rf = float(coupling_model.dipole(rf)) * ir.field_amplitude / 2 * HARTREE_EV
    gap = 2.0 * w_rf
    return DressedPair(
        PotentialCurve(r, lower, CurveLabel.DressedLower),
        PotentialCurve(r, upper, CurveLabel.DressedUpper),
        rf, gap, w,
    )


def default_dressed_pair(photon_energy: float = IR_PHOTON_EV, intensity: float = 2e11,
                         coupling_model: CouplingModel | None = None, curves=None) -> DressedPair:
    vg, vu = curves or embedded_curves()
    return dress_curves(vg, vu, IrFieldParams(photon_energy, intensity), coupling_model)


def resolve_curves(spec: str | None = None, vg_path=None, vu_path=None):
    """Curves named in a run config: 'embedded', 'morse' or explicit files."""
    if vg_path or vu_path:
        if not (vg_path and vu_path):
            raise ValueError("both curve files must be given")
        return (load_curve(Path(vg_path), CurveLabel.GroundSigmaG),
                load_curve(Path(vu_path), CurveLabel.ExcitedSigmaU))
    if spec in (None, "embedded"):
        return embedded_curves()
    if spec == "morse":
        return morse_curves()
    raise ValueError(f"unknown curve source {spec!r}")
