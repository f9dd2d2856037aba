"""Inverse pipeline: momenta -> frames, energies, spectra and asymmetry maps.

Hemisphere labels compare the electron direction with the proton direction
in the molecular frame: "same" when p_e . p_MF >= 0 (theta = 90 deg counts as
same).  KER is computed from the molecular-frame proton momentum, which is
exact for the two-body split used by the generator.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import HARTREE_EV, HYDROGEN_MASS, IONISATION_LIMIT_EV, IR_PHOTON_EV, PROTON_MASS
from .eventfile import EventFile
from .pathways import Parity, band_total_energy

log = logging.getLogger(__name__)

DEFAULT_KER_BIN = 0.05
DEFAULT_EE_BIN = 0.1
DEFAULT_HALF_WIDTH = 0.35


class EmptyBand(UserWarning):
    """A band selection matched no events."""


class InsufficientDelays(ValueError):
    """A delay scan needs at least eight delays spanning one period."""


def reconstruct_molecular_frame(p_proton, p_electron):
    """Proton momentum in the molecular frame, p_H+ + p_e / 2."""
    return np.asarray(p_proton, dtype=float) + 0.5 * np.asarray(p_electron, dtype=float)


def reconstruct_neutral(p_proton, p_electron):
    """Neutral H momentum from momentum conservation."""
    return -(np.asarray(p_proton, dtype=float) + np.asarray(p_electron, dtype=float))


def energies(p_electron, p_proton, frame: str = "molecular"):
    """(KER, E_e) in eV.

    In the molecular frame the two nuclei carry +/- p_MF, so
    KER = |p_MF|^2 (1/2m_p + 1/2m_H).  ``frame="lab"`` instead sums the
    laboratory kinetic energies of H+ and the reconstructed H, which
    includes the small centre-of-mass recoil from the electron.
    """
    pe = np.asarray(p_electron, dtype=float)
    pp = np.asarray(p_proton, dtype=float)
    if frame == "molecular":
        p2 = np.sum(reconstruct_molecular_frame(pp, pe) ** 2, axis=-1)
        ker = p2 * (0.5 / PROTON_MASS + 0.5 / HYDROGEN_MASS)
    elif frame == "lab":
        ph = reconstruct_neutral(pp, pe)
        ker = np.sum(pp**2, axis=-1) / (2 * PROTON_MASS) + np.sum(ph**2, axis=-1) / (2 * HYDROGEN_MASS)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    ee = 0.5 * np.sum(pe**2, axis=-1)
    return ker * HARTREE_EV, ee * HARTREE_EV


def classify(p_electron, p_proton):
    """True where the electron goes into the proton's hemisphere."""
    pe = np.asarray(p_electron, dtype=float)
    p_mf = reconstruct_molecular_frame(p_proton, pe)
    return np.sum(pe * p_mf, axis=-1) >= 0.0


@dataclass(frozen=True)
class ReducedEvents:
    """Per-event derived quantities."""

    delay_index: np.ndarray
    ker: np.ndarray
    electron_energy: np.ndarray
    same: np.ndarray

    def __len__(self):
        return len(self.ker)

    @property
    def total_energy(self):
        return self.ker + self.electron_energy

    def subset(self, mask) -> "ReducedEvents":
        return ReducedEvents(self.delay_index[mask], self.ker[mask], self.electron_energy[mask], self.same[mask])


def reduce_events(ev: EventFile, frame: str = "molecular") -> ReducedEvents:
    ker, ee = energies(ev.p_electron, ev.p_proton, frame)
    return ReducedEvents(np.asarray(ev.delay_index, dtype=np.int64), ker, ee, classify(ev.p_electron, ev.p_proton))


@dataclass(frozen=True)
class Binning:
    ker_edges: np.ndarray
    ee_edges: np.ndarray

    @classmethod
    def uniform(cls, ker_max: float = 2.5, ee_max: float = 12.0, ker_bin: float = DEFAULT_KER_BIN,
                ee_bin: float = DEFAULT_EE_BIN) -> "Binning":
        if ker_bin <= 0 or ee_bin <= 0:
            raise ValueError("bin widths must be positive")
        nk = int(round(ker_max / ker_bin))
        ne = int(round(ee_max / ee_bin))
        # rounded so that e.g. 12 * 0.05 lands on 0.6 exactly
        return cls(np.round(np.arange(nk + 1) * ker_bin, 12), np.round(np.arange(ne + 1) * ee_bin, 12))

    def __post_init__(self):
        for e in (self.ker_edges, self.ee_edges):
            if len(e) < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("bin edges must be strictly increasing")

    @property
    def ker_centers(self):
        return 0.5 * (self.ker_edges[1:] + self.ker_edges[:-1])

    @property
    def ee_centers(self):
        return 0.5 * (self.ee_edges[1:] + self.ee_edges[:-1])


@dataclass(eq=False)
class JointEnergySpectrum:
    ker_edges: np.ndarray
    ee_edges: np.ndarray
    counts_same: np.ndarray
    counts_opp: np.ndarray
    n_out_of_range: int = 0

    @classmethod
    def empty(cls, binning: Binning) -> "JointEnergySpectrum":
        shape = (len(binning.ker_edges) - 1, len(binning.ee_edges) - 1)
        return cls(binning.ker_edges, binning.ee_edges, np.zeros(shape, np.int64), np.zeros(shape, np.int64))

    @property
    def counts(self):
        return self.counts_same + self.counts_opp

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "JointEnergySpectrum") -> "JointEnergySpectrum":
        if not (np.array_equal(self.ker_edges, other.ker_edges) and np.array_equal(self.ee_edges, other.ee_edges)):
            raise ValueError("cannot merge spectra with different binning")
        return JointEnergySpectrum(self.ker_edges, self.ee_edges, self.counts_same + other.counts_same,
                                   self.counts_opp + other.counts_opp, self.n_out_of_range + other.n_out_of_range)


def _hist2(ker, ee, binning):
    h, _, _ = np.histogram2d(ker, ee, bins=[binning.ker_edges, binning.ee_edges])
    return h.astype(np.int64)


def fill_jes(ker, ee, same, binning: Binning | None = None, shard_size: int = 1 << 20) -> JointEnergySpectrum:
    """Hemisphere-resolved KER x E_e histogram; events outside are counted."""
    binning = binning or Binning.uniform()
    ker = np.asarray(ker, dtype=float)
    ee = np.asarray(ee, dtype=float)
    same = np.asarray(same, dtype=bool)
    jes = JointEnergySpectrum.empty(binning)
    for start in range(0, len(ker), shard_size):
        sl = slice(start, start + shard_size)
        k, e, s = ker[sl], ee[sl], same[sl]
        inside = ((k >= binning.ker_edges[0]) & (k <= binning.ker_edges[-1])
                  & (e >= binning.ee_edges[0]) & (e <= binning.ee_edges[-1]))
        part = JointEnergySpectrum(binning.ker_edges, binning.ee_edges,
                                   _hist2(k[inside & s], e[inside & s], binning),
                                   _hist2(k[inside & ~s], e[inside & ~s], binning),
                                   int(np.count_nonzero(~inside)))
        jes = jes.merge(part)
    return jes


def fill_jes_events(red: ReducedEvents, binning: Binning | None = None) -> JointEnergySpectrum:
    return fill_jes(red.ker, red.electron_energy, red.same, binning)


def hemisphere_asymmetry(n_same, n_opp):
    """A and its binomial sigma; NaN where no counts."""
    n_same = np.asarray(n_same, dtype=float)
    n_opp = np.asarray(n_opp, dtype=float)
    n = n_same + n_opp
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(n > 0, (n_same - n_opp) / n, np.nan)
        sigma = np.where(n > 0, np.sqrt(np.clip(1.0 - a**2, 0.0, None) / n), np.nan)
    return a, sigma


@dataclass(eq=False)
class AsymmetryMap:
    ker_edges: np.ndarray
    ee_edges: np.ndarray
    A: np.ndarray
    sigma_A: np.ndarray
    counts: np.ndarray


def asymmetry_map(jes: JointEnergySpectrum) -> AsymmetryMap:
    a, s = hemisphere_asymmetry(jes.counts_same, jes.counts_opp)
    return AsymmetryMap(jes.ker_edges, jes.ee_edges, a, s, jes.counts)


@dataclass(frozen=True)
class BandSelection:
    parity: Parity
    q: int
    photon_energy: float = IR_PHOTON_EV
    dissociation_limit: float = IONISATION_LIMIT_EV
    half_width: float = DEFAULT_HALF_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "parity", Parity.parse(self.parity))
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def total_energy_center(self) -> float:
        return band_total_energy(self.parity, self.q, self.photon_energy, self.dissociation_limit)

    @property
    def label(self) -> str:
        return f"OB{self.q}" if self.parity is Parity.Odd else f"EB{self.q - 1}"


def band_mask(ker, ee, band: BandSelection):
    etot = np.asarray(ker) + np.asarray(ee)
    return np.abs(etot - band.total_energy_center) <= band.half_width


def select_band(red: ReducedEvents, band: BandSelection) -> ReducedEvents:
    mask = band_mask(red.ker, red.electron_energy, band)
    if not np.any(mask):
        warnings.warn(f"band {band.label} selected no events", EmptyBand, stacklevel=2)
    return red.subset(mask)


def ker_projection(red: ReducedEvents, ker_edges) -> np.ndarray:
    h, _ = np.histogram(red.ker, bins=ker_edges)
    return h


def project_jes(jes: JointEnergySpectrum, band: BandSelection) -> np.ndarray:
    """KER projection of a filled spectrum, using bin centres to select."""
    kc = 0.5 * (jes.ker_edges[1:] + jes.ker_edges[:-1])
    ec = 0.5 * (jes.ee_edges[1:] + jes.ee_edges[:-1])
    mask = band_mask(kc[:, None], ec[None, :], band)
    return np.sum(np.where(mask, jes.counts, 0), axis=1)


def _fourier_shift(y, shift_steps: float):
    """y(t + shift) for y sampled on a uniform periodic grid (last axis)."""
    n = y.shape[-1]
    spec = np.fft.rfft(y, axis=-1)
    k = np.arange(spec.shape[-1])
    ramp = np.exp(2j * np.pi * k * shift_steps / n)
    if n % 2 == 0:
        # the Nyquist term has no defined direction; keep its real part
        ramp[-1] = np.cos(np.pi * shift_steps)
    return np.fft.irfft(spec * ramp, n=n, axis=-1)


def shift_periodic(values, delays, shift: float, period: float):
    """Resample ``values`` (last axis over ``delays``) at ``delays + shift``.

    Uses an exact Fourier shift when the delays are uniform and span a whole
    number of periods, else periodic linear interpolation on tau mod period.
    """
    values = np.asarray(values, dtype=float)
    delays = np.asarray(delays, dtype=float)
    n = len(delays)
    if shift == 0:
        return values.copy()
    step = np.diff(delays)
    if n > 2 and np.allclose(step, step[0], rtol=1e-9, atol=0):
        span = n * step[0]
        cycles = span / period
        if abs(cycles - round(cycles)) < 1e-6 and round(cycles) >= 1:
            return _fourier_shift(values, shift / step[0])
    phase = np.mod(delays, period)
    order = np.argsort(phase)
    xp = np.concatenate([phase[order] - period, phase[order], phase[order] + period])
    out = np.empty_like(values)
    target = np.mod(delays + shift, period)
    flat = values.reshape(-1, n)
    res = out.reshape(-1, n)
    for i, row in enumerate(flat):
        fp = np.tile(row[order], 3)
        res[i] = np.interp(target, xp, fp)
    return out


@dataclass(eq=False)
class DelayScanResult:
    """Hemisphere counts and asymmetries versus (KER bin, delay)."""

    delays: np.ndarray
    ker_edges: np.ndarray
    omega: float
    bands: list
    same: dict  # label -> [n_ker, n_tau]
    opp: dict
    summed_same: dict = field(default_factory=dict)  # parity value -> aligned sum
    summed_opp: dict = field(default_factory=dict)
    shifts: dict = field(default_factory=dict)  # label -> delay shift applied, fs
    subtract_mean: bool = False

    @property
    def ker_centers(self):
        return 0.5 * (self.ker_edges[1:] + self.ker_edges[:-1])

    def _finish(self, s, o):
        a, sig = hemisphere_asymmetry(s, o)
        if self.subtract_mean:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)  # rows without counts stay NaN
                a = a - np.nanmean(a, axis=-1, keepdims=True)
        return a, sig

    def band_asymmetry(self, label: str):
        return self._finish(self.same[label], self.opp[label])

    def summed_asymmetry(self, parity):
        key = Parity.parse(parity).value
        return self._finish(self.summed_same[key], self.summed_opp[key])

    def band_yield(self, label: str):
        return self.same[label] + self.opp[label]

    def ker_index(self, ker: float) -> int:
        # tolerate edges like 12 * 0.05 = 0.6000000000000001
        tol = 1e-9 * float(np.min(np.diff(self.ker_edges)))
        i = int(np.searchsorted(self.ker_edges, ker + tol, side="right") - 1)
        if not 0 <= i < len(self.ker_edges) - 1:
            raise ValueError(f"KER {ker} outside the scan binning")
        return i


def delay_scan(red: ReducedEvents, delays, bands, omega: float, *, ker_edges=None,
               chirp: dict | None = None, subtract_mean: bool = False) -> DelayScanResult:
    """Per-band A(KER, tau) and chirp-aligned same-parity sums.

    Args:
        red: reduced events with delay indices into ``delays``.
        delays: delay grid, fs.
        bands: BandSelection list.
        omega: IR angular frequency, rad/fs.
        chirp: order q -> Delta phi_{q,q-2} (rad). Each band is moved by
            (Delta phi_q - Delta phi_ref) / (2 omega), ref being the lowest
            band of the same parity, before summing.
        subtract_mean: remove each KER row's delay average from A.
    """
    delays = np.asarray(delays, dtype=float)
    n_tau = len(delays)
    period = np.pi / omega
    if n_tau < 8 or np.ptp(delays) + (np.ptp(delays) / max(n_tau - 1, 1)) < period * (1 - 1e-9):
        raise InsufficientDelays(f"need >= 8 delays spanning {period:.4f} fs, have {n_tau}")
    ker_edges = Binning.uniform().ker_edges if ker_edges is None else np.asarray(ker_edges)
    chirp = chirp or {}
    tau_edges = np.arange(n_tau + 1) - 0.5
    res = DelayScanResult(delays, ker_edges, omega, list(bands), {}, {}, subtract_mean=subtract_mean)
    for band in bands:
        sub = select_band(red, band)
        hs, _, _ = np.histogram2d(sub.ker[sub.same], sub.delay_index[sub.same], bins=[ker_edges, tau_edges])
        ho, _, _ = np.histogram2d(sub.ker[~sub.same], sub.delay_index[~sub.same], bins=[ker_edges, tau_edges])
        res.same[band.label] = hs
        res.opp[band.label] = ho
    for parity in Parity:
        members = sorted((b for b in bands if b.parity is parity), key=lambda b: b.q)
        if not members:
            continue
        ref = chirp.get(members[0].q, 0.0)
        tot_s = np.zeros((len(ker_edges) - 1, n_tau))
        tot_o = np.zeros_like(tot_s)
        for b in members:
            shift = (chirp.get(b.q, 0.0) - ref) / (2 * omega)
            res.shifts[b.label] = shift
            tot_s += shift_periodic(res.same[b.label], delays, shift, period)
            tot_o += shift_periodic(res.opp[b.label], delays, shift, period)
        res.summed_same[parity.value] = tot_s
        res.summed_opp[parity.value] = tot_o
    return res


def write_matrix_csv(path, row_axis, col_axis, matrix, row_name: str, col_name: str, value_name: str,
                     meta: dict | None = None) -> None:
    """Long-format CSV: one header line naming axes and units, one row per cell."""
    with open(path, "w") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(f"{row_name},{col_name},{value_name}\n")
        for i, r in enumerate(row_axis):
            for j, c in enumerate(col_axis):
                fh.write(f"{r:.6g},{c:.6g},{matrix[i, j]:.10g}\n")


def write_jes_csv(path, jes: JointEnergySpectrum, meta: dict | None = None) -> None:
    amap = asymmetry_map(jes)
    kc = 0.5 * (jes.ker_edges[1:] + jes.ker_edges[:-1])
    ec = 0.5 * (jes.ee_edges[1:] + jes.ee_edges[:-1])
    with open(path, "w") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("ker_eV,ee_eV,n_same,n_opp,A,sigma_A\n")
        for i, k in enumerate(kc):
            for j, e in enumerate(ec):
                fh.write(f"{k:.6g},{e:.6g},{jes.counts_same[i, j]},{jes.counts_opp[i, j]},"
                         f"{amap.A[i, j]:.10g},{amap.sigma_A[i, j]:.10g}\n")


def read_jes_csv(path) -> JointEnergySpectrum:
    """Inverse of :func:`write_jes_csv` (bin edges from uniform centres)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = np.genfromtxt(lines, delimiter=",", names=True)
    kc = np.unique(rows["ker_eV"])
    ec = np.unique(rows["ee_eV"])

    def edges(c):
        if len(c) == 1:
            return np.array([c[0] - 0.5, c[0] + 0.5])
        h = 0.5 * np.diff(c)
        return np.concatenate([[c[0] - h[0]], c[:-1] + h, [c[-1] + h[-1]]])

    shape = (len(kc), len(ec))
    same = rows["n_same"].reshape(shape).astype(np.int64)
    opp = rows["n_opp"].reshape(shape).astype(np.int64)
    return JointEnergySpectrum(edges(kc), edges(ec), same, opp)
