"""Physics bundle shared by the model maps, the generator and the checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.stats import ncx2

from .constants import HARTREE_EV, IONISATION_LIMIT_EV, IR_PHOTON_EV, PAIR_REDUCED_MASS, omega_rad_per_fs
from .pathways import (BandModel, KerEnvelope, Parity, PathwaySpec, XuvSpectrum, asymmetry,
                       dissociation_probability, time_average_asymmetry)
from .potentials import CouplingModel, IrFieldParams, dress_curves, resolve_curves
from .wkb import DEFAULT_R_MAX, DeltaThetaTable, delta_theta_table


@lru_cache(maxsize=16)
def _cached_table(curve_source, photon_energy, intensity, coupling, r_max, dissociation_limit):
    vg, vu = resolve_curves(*curve_source)
    pair = dress_curves(vg, vu, IrFieldParams(photon_energy, intensity), coupling)
    return delta_theta_table(vg, pair.lower, photon_energy, r_max=r_max,
                             dissociation_limit=dissociation_limit)


def default_bands(envelope: KerEnvelope | None = None) -> list[BandModel]:
    env = envelope or KerEnvelope()
    return ([BandModel(Parity.Odd, q, env) for q in (17, 19, 21)]
            + [BandModel(Parity.Even, q, env) for q in (19, 21, 23)])


@dataclass(frozen=True, eq=False)
class PhysicsModel:
    """Everything needed to evaluate A(KER, tau) and the band yields."""

    bands: tuple[BandModel, ...]
    xuv: XuvSpectrum
    delta_theta: DeltaThetaTable
    photon_energy: float = IR_PHOTON_EV
    dissociation_limit: float = IONISATION_LIMIT_EV
    intensity: float = 2e11
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, bands=None, xuv: XuvSpectrum | None = None, *, photon_energy: float = IR_PHOTON_EV,
              intensity: float = 2e11, dissociation_limit: float = IONISATION_LIMIT_EV,
              curves: str = "embedded", vg_path=None, vu_path=None,
              coupling: CouplingModel | None = None, r_max: float = DEFAULT_R_MAX) -> "PhysicsModel":
        bands = tuple(bands) if bands is not None else tuple(default_bands())
        if xuv is None:
            lo = min(b.q for b in bands) - 2
            hi = max(b.q for b in bands)
            xuv = XuvSpectrum.build(range(lo, hi + 1, 2), photon_energy)
        source = (curves, None if vg_path is None else str(vg_path), None if vu_path is None else str(vu_path))
        table = _cached_table(source, photon_energy, intensity, coupling or CouplingModel(), r_max,
                              dissociation_limit)
        return cls(bands, xuv, table, photon_energy, dissociation_limit, intensity)

    @property
    def omega(self) -> float:
        return omega_rad_per_fs(self.photon_energy)

    @property
    def period(self) -> float:
        return np.pi / self.omega

    def band(self, label: str) -> BandModel:
        for b in self.bands:
            if b.label == label:
                return b
        raise KeyError(label)

    def with_bands(self, bands) -> "PhysicsModel":
        return replace(self, bands=tuple(bands))

    def with_xuv(self, xuv: XuvSpectrum) -> "PhysicsModel":
        return replace(self, xuv=xuv)

    def spec(self, band: BandModel, ker) -> PathwaySpec:
        return band.spec(ker, self.xuv, self.delta_theta, self.photon_energy)

    def asymmetry(self, band: BandModel, ker, tau):
        """A on the broadcast of ``ker`` and ``tau``."""
        return asymmetry(self.spec(band, ker), tau)

    def band_yield(self, band: BandModel, ker, tau):
        return dissociation_probability(self.spec(band, ker), tau)

    def asymmetry_map(self, band: BandModel, kers, taus) -> np.ndarray:
        """A[i_ker, j_tau]."""
        kers = np.asarray(kers, dtype=float)[:, None]
        taus = np.asarray(taus, dtype=float)[None, :]
        return np.asarray(self.asymmetry(band, kers, taus))

    def mean_asymmetry(self, band: BandModel, kers, n_samples: int = 64) -> np.ndarray:
        return np.asarray(time_average_asymmetry(self.spec(band, np.asarray(kers, dtype=float)), n_samples))

    def bin_average(self, band: BandModel, lo: float, hi: float, taus, n_sub: int = 41,
                    momentum_sigma: float = 0.0):
        """(integrated yield, yield-weighted A) over the KER bin [lo, hi], per delay.

        With ``momentum_sigma`` > 0 (a.u. per component of the reconstructed
        relative momentum) the bin collects true KERs through the detector
        response: |p_rec|^2 / sigma^2 is non-central chi-square with 3 dof.
        """
        taus = np.asarray(taus, dtype=float)[None, :]
        if momentum_sigma <= 0.0:
            k = np.linspace(lo, hi, n_sub)[:, None]
            w = np.ones_like(k)
            dk = (hi - lo) / n_sub
        else:
            s2 = momentum_sigma**2
            to_p2 = 2.0 * PAIR_REDUCED_MASS / HARTREE_EV  # eV -> |p|^2 in a.u.
            sig_k = np.sqrt(max(hi, 0.05) * to_p2 * s2) / PAIR_REDUCED_MASS * HARTREE_EV
            kmin, kmax = max(lo - 8 * sig_k, 1e-6), hi + 8 * sig_k
            n = max(n_sub, int(np.ceil((kmax - kmin) / (hi - lo) * n_sub)))
            k = np.linspace(kmin, kmax, n)[:, None]
            nc = k * to_p2 / s2
            w = ncx2.cdf(hi * to_p2 / s2, 3, nc) - ncx2.cdf(lo * to_p2 / s2, 3, nc)
            dk = (kmax - kmin) / n
        y = np.asarray(self.band_yield(band, k, taus)) * w
        a = np.asarray(self.asymmetry(band, k, taus))
        return np.sum(y, axis=0) * dk, np.sum(y * a, axis=0) / np.sum(y, axis=0)
