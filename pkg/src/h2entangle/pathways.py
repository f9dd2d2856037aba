"""Quantum-path amplitudes and the parity-qubit final state.

Odd bands (one XUV photon, q) interfere a ground-state dissociation path g1
with two bond-softening paths: b1 (harmonic q-2, IR absorbed by both the
photoelectron and the ion) and b2 (harmonic q, IR emitted by the
photoelectron, absorbed by the ion).  The final state is

    g1 |+,-> + (b1 + b2) |-,+>          (bound parity, free-electron parity)

Even bands (sideband between q-2 and q) interfere g1 (q-2 plus IR), g2
(q minus IR) on the ground-state curve with one bond-softening path b1:

    (g1 + g2) |+,+> + b1 |-,->

Phases follow the convention phi(tau) = +omega*tau, with tau > 0 meaning the
IR arrives later.  All functions broadcast over numpy arrays in ``ker``,
the magnitudes, nuclear phases and ``tau``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .constants import IONISATION_LIMIT_EV, IR_PHOTON_EV, omega_rad_per_fs

# sign in A = SIGN * 2 Re[c_gs c_bs*] / (|c_gs|^2 + |c_bs|^2); an older
# derivation of the left/right projection used +1
ASYMMETRY_SIGN = -1.0

# partial waves: the same l on every path, or the lowest l allowed by the
# continuum-electron parity of each path
PARTIAL_WAVES_UNIFORM = (1, 1, 1)
PARTIAL_WAVES_BY_PARITY = {"odd": (1, 0, 0), "even": (0, 0, 1)}


class BelowThreshold(ValueError):
    """Electron energy would be zero or negative."""


class MissingHarmonic(KeyError):
    """A harmonic order needed by a path is absent from the XUV spectrum."""


class ZeroState(ValueError):
    """Both parity-sector coefficients vanish."""


class Parity(enum.Enum):
    Odd = "odd"
    Even = "even"

    @classmethod
    def parse(cls, value) -> "Parity":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class Harmonic:
    order: int
    energy: float  # eV
    magnitude: float
    phase: float  # spectral phase, rad


@dataclass(frozen=True)
class XuvSpectrum:
    """Odd harmonics of the IR with their spectral phases."""

    harmonics: tuple[Harmonic, ...]
    photon_energy: float = IR_PHOTON_EV

    def __post_init__(self):
        orders = [h.order for h in self.harmonics]
        if not orders:
            raise ValueError("empty XUV spectrum")
        if any(q % 2 == 0 for q in orders):
            raise ValueError("harmonic orders must be odd")
        if any(b - a != 2 for a, b in zip(orders, orders[1:])):
            raise ValueError("harmonic orders must increase in steps of 2")
        for h in self.harmonics:
            if abs(h.energy - h.order * self.photon_energy) > 1e-9:
                raise ValueError(f"harmonic {h.order}: energy must equal q * hbar*omega")

    @classmethod
    def build(cls, orders: Sequence[int], photon_energy: float = IR_PHOTON_EV,
              phases: Sequence[float] | None = None, chirp_step: float = 0.0,
              magnitudes: Sequence[float] | None = None) -> "XuvSpectrum":
        """Spectrum with explicit ``phases`` or a linear attochirp.

        With ``chirp_step`` c the phase difference between orders q and q-2
        is c times the index of q (the lowest order has index 0), so the
        relative phase differences form a staircase of step c.
        """
        orders = list(orders)
        if phases is None:
            k = np.arange(len(orders))
            phases = 0.5 * chirp_step * k * (k + 1)
        if magnitudes is None:
            magnitudes = [1.0] * len(orders)
        if not (len(phases) == len(orders) == len(magnitudes)):
            raise ValueError("orders, phases and magnitudes differ in length")
        return cls(tuple(Harmonic(int(q), q * photon_energy, float(m), float(p))
                         for q, p, m in zip(orders, phases, magnitudes)), photon_energy)

    @property
    def orders(self) -> list[int]:
        return [h.order for h in self.harmonics]

    def phase(self, q: int) -> float:
        for h in self.harmonics:
            if h.order == q:
                return h.phase
        raise MissingHarmonic(q)

    def chirp(self, q: int) -> float:
        """Delta-phi_{q,q-2} = phi_q - phi_{q-2}."""
        return self.phase(q) - self.phase(q - 2)


@dataclass(frozen=True)
class PathwaySpec:
    """Inputs for the three interfering paths of one band at one KER.

    ``magnitudes`` and ``partial_waves`` are ordered (g1, b1, b2) for odd
    bands and (g1, g2, b1) for even bands.
    """

    band_parity: Parity
    q: int
    ker: float
    magnitudes: tuple
    theta_gs: float
    theta_bs: float
    xuv: XuvSpectrum
    partial_waves: tuple[int, int, int] = PARTIAL_WAVES_UNIFORM
    photon_energy: float = IR_PHOTON_EV

    def __post_init__(self):
        object.__setattr__(self, "band_parity", Parity.parse(self.band_parity))
        if len(self.magnitudes) != 3 or len(self.partial_waves) != 3:
            raise ValueError("three magnitudes and three partial waves are required")
        if any(np.any(np.asarray(m) < 0) for m in self.magnitudes):
            raise ValueError("magnitudes must be non-negative")
        if any(int(l) < 0 for l in self.partial_waves):
            raise ValueError("partial waves must be non-negative")

    @property
    def omega(self) -> float:
        return omega_rad_per_fs(self.photon_energy)

    @property
    def period(self) -> float:
        """Oscillation period pi/omega of the asymmetry, fs."""
        return np.pi / self.omega

    def with_magnitudes(self, *mags) -> "PathwaySpec":
        return replace(self, magnitudes=tuple(mags))


@dataclass(frozen=True)
class FinalState:
    c_gs: complex
    c_bs: complex
    band_parity: Parity

    @property
    def norm_sq(self):
        return np.abs(self.c_gs) ** 2 + np.abs(self.c_bs) ** 2


def electron_energy(band_parity, q: int, ker, photon_energy: float = IR_PHOTON_EV,
                    dissociation_limit: float = IONISATION_LIMIT_EV):
    """Photoelectron energy (eV) shared by every path of the band.

    Raises:
        BelowThreshold: if the energy is not positive.
    """
    parity = Parity.parse(band_parity)
    e = q * photon_energy - dissociation_limit - np.asarray(ker, dtype=float)
    if parity is Parity.Even:
        e = e - photon_energy
    if np.any(e <= 0):
        raise BelowThreshold(f"electron energy {np.min(e):.4g} eV <= 0 for q={q}, {parity.value} band")
    return float(e) if np.ndim(e) == 0 else e


def band_total_energy(band_parity, q: int, photon_energy: float = IR_PHOTON_EV,
                      dissociation_limit: float = IONISATION_LIMIT_EV) -> float:
    """KER + E_e on the band's diagonal."""
    parity = Parity.parse(band_parity)
    n_photons = q if parity is Parity.Odd else q - 1
    return n_photons * photon_energy - dissociation_limit


def path_phases(spec: PathwaySpec, tau):
    """Arguments of the three path amplitudes at delay ``tau`` (fs)."""
    wt = spec.omega * np.asarray(tau, dtype=float)
    l1, l2, l3 = (0.5 * np.pi * l for l in spec.partial_waves)
    phi_q = spec.xuv.phase(spec.q)
    phi_q2 = spec.xuv.phase(spec.q - 2)
    tg, tb = spec.theta_gs, spec.theta_bs
    if spec.band_parity is Parity.Odd:
        return (tg - 0.5 * np.pi - l1 + phi_q,
                tb - l2 + phi_q2 + 2 * wt,
                tb - l3 + phi_q + 0 * wt)
    return (tg - l1 + phi_q2 + wt,
            tg - l2 + phi_q - wt,
            tb - 0.5 * np.pi - l3 + phi_q2 + wt)


def path_amplitudes(spec: PathwaySpec, tau):
    return tuple(np.asarray(m) * np.exp(1j * ph) for m, ph in zip(spec.magnitudes, path_phases(spec, tau)))


def assemble_odd(spec: PathwaySpec, tau) -> FinalState:
    """c_gs = g1 on |+,->, c_bs = b1 + b2 on |-,+>."""
    if spec.band_parity is not Parity.Odd:
        raise ValueError("assemble_odd needs an odd-band spec")
    g1, b1, b2 = path_amplitudes(spec, tau)
    return FinalState(g1 + 0 * b1, b1 + b2, Parity.Odd)


def assemble_even(spec: PathwaySpec, tau) -> FinalState:
    """c_gs = g1 + g2 on |+,+>, c_bs = b1 on |-,->."""
    if spec.band_parity is not Parity.Even:
        raise ValueError("assemble_even needs an even-band spec")
    g1, g2, b1 = path_amplitudes(spec, tau)
    return FinalState(g1 + g2, b1 + 0 * g1, Parity.Even)


def assemble(spec: PathwaySpec, tau) -> FinalState:
    return assemble_odd(spec, tau) if spec.band_parity is Parity.Odd else assemble_even(spec, tau)


def _check_nonzero(norm):
    if np.any(np.asarray(norm) == 0):
        raise ZeroState("both parity-sector coefficients are zero")


def asymmetry_of_state(state: FinalState):
    """Hemisphere asymmetry -2 Re[c_gs c_bs*] / (|c_gs|^2 + |c_bs|^2)."""
    norm = state.norm_sq
    _check_nonzero(norm)
    a = ASYMMETRY_SIGN * 2 * np.real(state.c_gs * np.conj(state.c_bs)) / norm
    return float(a) if np.ndim(a) == 0 else a


def concurrence(state: FinalState):
    """Pure-state concurrence 2|c_gs||c_bs| / (|c_gs|^2 + |c_bs|^2)."""
    norm = state.norm_sq
    _check_nonzero(norm)
    c = 2 * np.abs(state.c_gs) * np.abs(state.c_bs) / norm
    return float(c) if np.ndim(c) == 0 else c


def _relative_phases(spec: PathwaySpec, tau):
    """Pairwise phase differences written out from the path phase rules."""
    wt = spec.omega * np.asarray(tau, dtype=float)
    dtheta = spec.theta_gs - spec.theta_bs
    chirp = spec.xuv.chirp(spec.q)
    l1, l2, l3 = spec.partial_waves
    half_pi = 0.5 * np.pi
    if spec.band_parity is Parity.Odd:
        g1_b1 = dtheta - half_pi - half_pi * (l1 - l2) + chirp - 2 * wt
        g1_b2 = dtheta - half_pi - half_pi * (l1 - l3) + 0 * wt
        b1_b2 = -half_pi * (l2 - l3) - chirp + 2 * wt
        return g1_b1, g1_b2, b1_b2
    g1_b1 = dtheta + half_pi - half_pi * (l1 - l3) + 0 * wt
    g2_b1 = dtheta + half_pi - half_pi * (l2 - l3) + chirp - 2 * wt
    g1_g2 = -half_pi * (l1 - l2) - chirp + 2 * wt
    return g1_b1, g2_b1, g1_g2


def asymmetry_odd(spec: PathwaySpec, tau):
    """Closed-form odd-band asymmetry.

    A = -2 (|g1||b1| cos d(g1,b1) + |g1||b2| cos d(g1,b2))
        / (|g1|^2 + |b1|^2 + |b2|^2 + 2 |b1||b2| cos d(b1,b2))
    """
    if spec.band_parity is not Parity.Odd:
        raise ValueError("asymmetry_odd needs an odd-band spec")
    g1, b1, b2 = (np.asarray(m, dtype=float) for m in spec.magnitudes)
    d_g1b1, d_g1b2, d_b1b2 = _relative_phases(spec, tau)
    num = g1 * b1 * np.cos(d_g1b1) + g1 * b2 * np.cos(d_g1b2)
    # |b1 + b2|^2 written without cancellation near destructive interference
    den = g1**2 + (b1 - b2) ** 2 + 4 * b1 * b2 * np.cos(0.5 * d_b1b2) ** 2
    _check_nonzero(den)
    a = ASYMMETRY_SIGN * 2 * num / den
    return float(a) if np.ndim(a) == 0 else a


def asymmetry_even(spec: PathwaySpec, tau):
    """Closed-form even-band asymmetry.

    A = -2 (|g2||b1| cos d(g2,b1) + |g1||b1| cos d(g1,b1))
        / (|g1|^2 + |g2|^2 + |b1|^2 + 2 |g1||g2| cos d(g1,g2))
    """
    if spec.band_parity is not Parity.Even:
        raise ValueError("asymmetry_even needs an even-band spec")
    g1, g2, b1 = (np.asarray(m, dtype=float) for m in spec.magnitudes)
    d_g1b1, d_g2b1, d_g1g2 = _relative_phases(spec, tau)
    num = g2 * b1 * np.cos(d_g2b1) + g1 * b1 * np.cos(d_g1b1)
    den = (g1 - g2) ** 2 + 4 * g1 * g2 * np.cos(0.5 * d_g1g2) ** 2 + b1**2
    _check_nonzero(den)
    a = ASYMMETRY_SIGN * 2 * num / den
    return float(a) if np.ndim(a) == 0 else a


def asymmetry(spec: PathwaySpec, tau):
    return asymmetry_odd(spec, tau) if spec.band_parity is Parity.Odd else asymmetry_even(spec, tau)


def two_path_asymmetry(alpha: complex, beta: complex, tau, photon_energy: float = IR_PHOTON_EV):
    """A for alpha |a> + beta exp(2 i omega tau) |b> (one GS, one BS path)."""
    phi = omega_rad_per_fs(photon_energy) * np.asarray(tau, dtype=float)
    ma, mb = np.abs(alpha), np.abs(beta)
    return (-2 * ma * mb * np.cos(np.angle(alpha) - np.angle(beta) - 2 * phi)) / (ma**2 + mb**2)


def dissociation_probability(spec: PathwaySpec, tau, coherent: bool = False):
    """Yield of the band at (KER, tau).

    By default the sum over the two orthogonal parity sectors,
    |c_gs|^2 + |c_bs|^2, which is what weights generated events.  With
    ``coherent=True`` the squared modulus of the plain sum of all three
    path amplitudes is returned instead.
    """
    amps = path_amplitudes(spec, tau)
    if coherent:
        p = np.abs(amps[0] + amps[1] + amps[2]) ** 2
    else:
        p = assemble(spec, tau).norm_sq
    return float(p) if np.ndim(p) == 0 else p


def time_average_asymmetry(spec: PathwaySpec, n_samples: int = 64):
    """Mean of A over one period pi/omega on a uniform grid (endpoint excluded)."""
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    tau = np.arange(n_samples) * spec.period / n_samples
    ker_shape = np.shape(np.broadcast_arrays(*[np.asarray(m) for m in spec.magnitudes], spec.theta_gs)[0])
    tau = tau.reshape((n_samples,) + (1,) * len(ker_shape))
    a = np.mean(asymmetry(spec, tau), axis=0)
    return float(a) if np.ndim(a) == 0 else a


# ---------------------------------------------------------------------------
# KER envelopes and band models


@dataclass(frozen=True)
class KerEnvelope:
    """|alpha|^2 = A exp(-a KER) (ground state), |beta|^2 a Gaussian bump
    (bond softening).  Energies in eV, ``gs_decay`` in 1/eV."""

    gs_amplitude: float = 1.0
    gs_decay: float = 4.0
    bs_height: float = 0.3
    bs_center: float = 0.6
    bs_width: float = 0.15

    def __post_init__(self):
        if self.gs_amplitude < 0 or self.bs_height < 0 or self.bs_width <= 0:
            raise ValueError("envelope amplitudes must be >= 0 and bs_width > 0")

    def alpha_sq(self, ker):
        return self.gs_amplitude * np.exp(-abs(self.gs_decay) * np.asarray(ker, dtype=float))

    def beta_sq(self, ker):
        x = (np.asarray(ker, dtype=float) - self.bs_center) / self.bs_width
        return self.bs_height * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class BandModel:
    """One diagonal band: parity, reference order q and its KER envelopes.

    Path magnitudes come from the envelopes with the split used when the
    envelopes are extracted from data: b1 = b2 = beta/2 in odd bands and
    g1 = g2 = alpha/2 in even bands.  Setting one of ``path_scale`` to zero
    switches that path off.
    """

    parity: Parity
    q: int
    envelope: KerEnvelope = field(default_factory=KerEnvelope)
    partial_waves: tuple[int, int, int] = PARTIAL_WAVES_UNIFORM
    path_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parity", Parity.parse(self.parity))
        if not self.label:
            tag = f"OB{self.q}" if self.parity is Parity.Odd else f"EB{self.q - 1}"
            object.__setattr__(self, "label", tag)

    def magnitudes(self, ker):
        alpha = np.sqrt(self.envelope.alpha_sq(ker))
        beta = np.sqrt(self.envelope.beta_sq(ker))
        if self.parity is Parity.Odd:
            mags = (alpha, 0.5 * beta, 0.5 * beta)
        else:
            mags = (0.5 * alpha, 0.5 * alpha, beta)
        return tuple(s * m for s, m in zip(self.path_scale, mags))

    def spec(self, ker, xuv: XuvSpectrum, delta_theta: Callable, photon_energy: float) -> PathwaySpec:
        """PathwaySpec at ``ker``; ``delta_theta(ker)`` supplies Theta_gs - Theta_bs.

        Only the difference of the nuclear phases is observable, so
        Theta_bs is set to zero.
        """
        return PathwaySpec(self.parity, self.q, ker, self.magnitudes(ker),
                           np.asarray(delta_theta(ker), dtype=float), 0.0, xuv,
                           self.partial_waves, photon_energy)

    def total_energy(self, photon_energy: float, dissociation_limit: float = IONISATION_LIMIT_EV) -> float:
        return band_total_energy(self.parity, self.q, photon_energy, dissociation_limit)
