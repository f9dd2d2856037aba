"""Exact Born-Oppenheimer energies of the hydrogen molecular ion.

The one-electron two-centre problem separates in prolate spheroidal
coordinates (xi, eta).  For sigma states (m = 0) and electronic energy
E = -2 p**2 / R**2 the two separated equations are

    -d/deta[(1 - eta**2) G'] - p**2 eta**2 G     =  A G
    -d/dxi [(xi**2 - 1) F']  + (p**2 xi**2 - 2 R xi) F = -A F

with a common separation constant A.  The angular equation is diagonalised
in a Legendre basis of fixed parity; the radial one in Laguerre functions
exp(-s/2) L_k(s) of the scaled variable s = 2 p (xi - 1), whose matrix
elements are polynomial times exp(-s) and therefore exact under
Gauss-Laguerre quadrature.  The energy is the root in p of
A_eta(p) - A_xi(p).

This module is only used to regenerate the bundled potential tables
(``python -m h2entangle.h2plus``); the rest of the package reads the tables.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np
from numpy.polynomial import laguerre as npl
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .constants import HARTREE_EV, IONISATION_LIMIT_EV

# (n_eta, gerade) of the two lowest sigma states
_STATES = {"1s_sigma_g": 0, "2p_sigma_u": 1}


def _eta_eigenvalue(p: float, parity: int, n_basis: int) -> float:
    """Lowest angular separation constant in the Legendre sector ``parity``.

    The operator is l(l+1) - p**2 eta**2; eta**2 couples l to l and l +- 2,
    so each parity sector is tridiagonal in normalised Legendre functions.
    """
    ls = np.arange(parity, parity + 2 * n_basis, 2, dtype=float)
    diag_eta2 = (2 * ls * (ls + 1) - 1) / ((2 * ls - 1) * (2 * ls + 3))
    lo = ls[:-1]
    off_eta2 = (lo + 1) * (lo + 2) / ((2 * lo + 3) * np.sqrt((2 * lo + 1) * (2 * lo + 5)))
    diag = ls * (ls + 1) - p**2 * diag_eta2
    off = -(p**2) * off_eta2
    return float(eigh_tridiagonal(diag, off, select="i", select_range=(0, 0), eigvals_only=True)[0])


class _XiSolver:
    """Radial (xi) eigenvalue in a Laguerre-function basis."""

    def __init__(self, n_basis: int = 40):
        self.n = n_basis
        self.s, self.w = npl.laggauss(n_basis + 4)
        # L_k(s) and dL_k/ds on the quadrature nodes
        eye = np.eye(n_basis)
        self.L = np.array([npl.lagval(self.s, eye[k]) for k in range(n_basis)])
        self.dL = np.array([npl.lagval(self.s, npl.lagder(eye[k])) for k in range(n_basis)])

    def eigenvalue(self, p: float, R: float) -> float:
        s, w = self.s, self.w
        xi = 1.0 + s / (2 * p)
        # basis functions with the exp(-s/2) factor folded into the weight
        f = self.L
        df = self.dL - 0.5 * self.L
        kin = 4 * p**2 * (xi**2 - 1) * w
        pot = (p**2 * xi**2 - 2 * R * xi) * w
        H = (df * kin) @ df.T + (f * pot) @ f.T
        # Laguerre functions are orthonormal in s
        lam = np.linalg.eigvalsh(H)
        return float(lam[0])


def electronic_energy(R: float, state: str = "1s_sigma_g", *, n_eta: int = 0,
                      xi_solver: _XiSolver | None = None) -> float:
    """Electronic energy (Hartree, without 1/R) at internuclear distance R."""
    parity = _STATES[state]
    solver = xi_solver or _XiSolver()
    n_eta = n_eta or max(40, int(2.5 * R) + 20)

    def mismatch(p):
        return _eta_eigenvalue(p, parity, n_eta) + solver.eigenvalue(p, R)

    # E lies between the united-atom and separated-atom limits
    lo = R * math.sqrt(0.2 / 2)
    hi = R * math.sqrt(2.05 / 2)
    grid = np.linspace(lo, hi, 60)
    vals = np.array([mismatch(x) for x in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        raise RuntimeError(f"no root for {state} at R={R}")
    i = idx[0]
    p = brentq(mismatch, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14)
    return -2 * p**2 / R**2


def default_grid() -> np.ndarray:
    """Internuclear distances of the bundled tables (a.u.)."""
    return np.unique(np.round(np.concatenate([
        np.arange(0.5, 10.0, 0.05),
        np.arange(10.0, 20.0, 0.2),
        np.arange(20.0, 40.0, 0.5),
        np.arange(40.0, 100.0 + 1e-9, 1.0),
    ]), 6))


def potential_table(R: np.ndarray, state: str) -> np.ndarray:
    """Potential energy in eV on the H2-ground-state scale (asymptote = I_d)."""
    solver = _XiSolver()
    out = np.empty(len(R))
    for i, r in enumerate(R):
        e = electronic_energy(float(r), state, xi_solver=solver)
        out[i] = IONISATION_LIMIT_EV + (e + 1.0 / r + 0.5) * HARTREE_EV
    return out


def write_tables(directory: Path) -> None:
    R = default_grid()
    vg = potential_table(R, "1s_sigma_g")
    vu = potential_table(R, "2p_sigma_u")
    # the g/u splitting drops below double precision near R ~ 35
    vu = np.maximum(vu, vg)
    for name, v in (("1s_sigma_g", vg), ("2p_sigma_u", vu)):
        header = (
            f"H2+ {name} Born-Oppenheimer potential\n"
            "generated by h2entangle.h2plus (exact spheroidal separation)\n"
            f"energy zero: H2 ground state; asymptote H(1s) + H+ at {IONISATION_LIMIT_EV} eV\n"
            "columns: R [a.u.]  V [eV]"
        )
        np.savetxt(directory / f"h2plus_{name}.dat", np.column_stack([R, v]),
                   fmt=["%.6f", "%.12f"], header=header)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).parent / "data")
    args = parser.parse_args(argv)
    write_tables(args.out)


if __name__ == "__main__":
    main()
