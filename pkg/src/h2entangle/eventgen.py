"""Monte Carlo generator of electron-proton coincidence events.

Per delay step the generator draws a band and a KER from the band yields
|c_gs|^2 + |c_bs|^2, fixes the electron energy by energy conservation,
orients the molecule isotropically and puts the electron into the proton's
hemisphere with probability (1 + A)/2.  Momenta are laboratory-frame
momenta of the electron and the proton in atomic units; the neutral H is not
recorded.  Each delay step has its own counter-based (Philox) stream derived
from the run seed, so the output does not depend on thread scheduling.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import HARTREE_EV, HYDROGEN_MASS, PAIR_REDUCED_MASS, PROTON_MASS
from .eventfile import EventFile, make_records
from .model import PhysicsModel
from .pathways import BandModel, electron_energy

log = logging.getLogger(__name__)

# reduced mass of the H+ / H pair, for KER = p_rel^2 / (2 mu)


@dataclass(frozen=True, eq=False)
class SimConfig:
    model: PhysicsModel
    delays: np.ndarray  # fs
    events_total: int
    rng_seed: int = 1
    smear_electron: float = 0.01  # a.u. per Cartesian component
    smear_ion: float = 0.3
    ker_max: float = 1.5  # eV
    ker_points: int = 3000
    threads: int = 1
    config_hash: bytes = b"\0" * 32

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        object.__setattr__(self, "delays", d)
        if d.ndim != 1 or d.size == 0:
            raise ValueError("delay grid is empty")
        if self.events_total <= 0:
            raise ValueError("events_total must be positive")
        if self.smear_electron < 0 or self.smear_ion < 0:
            raise ValueError("smearing widths must be non-negative")
        if not self.ker_max > 0:
            raise ValueError("ker_max must be positive")


@dataclass(eq=False)
class GeneratedEvents:
    """Events plus the generator-side truth used by closed-loop checks."""

    delay_index: np.ndarray
    p_electron: np.ndarray
    p_proton: np.ndarray
    band_index: np.ndarray
    ker: np.ndarray
    electron_energy: np.ndarray
    asymmetry: np.ndarray
    axis: np.ndarray  # unit vector of the proton in the molecular frame
    same_hemisphere: np.ndarray
    p_neutral: np.ndarray
    extras: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.delay_index)

    @classmethod
    def concatenate(cls, parts):
        parts = list(parts)
        names = ["delay_index", "p_electron", "p_proton", "band_index", "ker", "electron_energy",
                 "asymmetry", "axis", "same_hemisphere", "p_neutral"]
        return cls(**{n: np.concatenate([getattr(p, n) for p in parts]) for n in names})


def delay_streams(seed: int, n: int) -> tuple[np.random.Generator, list[np.random.Generator]]:
    """A master stream and ``n`` independent per-delay streams."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1))
    children = ss.spawn(n + 1)
    gens = [np.random.Generator(np.random.Philox(c)) for c in children]
    return gens[0], gens[1:]


def detector_smear(p, sigma: float, rng: np.random.Generator):
    """Add independent Gaussian offsets of width ``sigma`` to every component."""
    p = np.asarray(p, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return p.copy()
    return p + rng.normal(0.0, sigma, size=p.shape)


def _isotropic(rng, n):
    cos_t = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    sin_t = np.sqrt(1.0 - cos_t**2)
    return np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])


def _perpendicular_basis(n):
    helper = np.where(np.abs(n[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(n, e1)
    return e1, e2


def kinematics(ker, e_electron, axis, cos_theta, azimuth):
    """Lab momenta from energies and angles (no smearing).

    The ion recoils against the electron with -p_e, shared equally by the
    two nuclei; relative motion along ``axis`` carries KER with the H+/H
    reduced mass.  Returns (p_e, p_proton, p_neutral).
    """
    ker_au = np.asarray(ker, dtype=float) / HARTREE_EV
    p_rel = np.sqrt(2.0 * PAIR_REDUCED_MASS * ker_au)
    p_e_mag = np.sqrt(2.0 * np.asarray(e_electron, dtype=float) / HARTREE_EV)
    e1, e2 = _perpendicular_basis(axis)
    sin_t = np.sqrt(np.clip(1.0 - cos_theta**2, 0.0, None))
    direction = (cos_theta[:, None] * axis
                 + (sin_t * np.cos(azimuth))[:, None] * e1
                 + (sin_t * np.sin(azimuth))[:, None] * e2)
    p_e = p_e_mag[:, None] * direction
    p_mf = p_rel[:, None] * axis
    p_proton = p_mf - 0.5 * p_e
    p_neutral = -p_mf - 0.5 * p_e
    return p_e, p_proton, p_neutral


def _ker_sampler(model: PhysicsModel, band: BandModel, tau: float, ker_max: float, n_points: int):
    """Cell edges and cumulative weights of the band's KER density at ``tau``."""
    edges = np.linspace(0.0, ker_max, n_points + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    w = np.asarray(model.band_yield(band, mid, tau)) * np.diff(edges)
    return edges, w


def sample_band_events(model: PhysicsModel, band: BandModel, n: int, tau: float,
                       rng: np.random.Generator, *, delay_index: int = 0, band_index: int = 0,
                       smear_electron: float = 0.0, smear_ion: float = 0.0,
                       ker_max: float = 1.5, ker_points: int = 3000,
                       ker: np.ndarray | None = None, asymmetry: np.ndarray | None = None) -> GeneratedEvents:
    """Draw ``n`` events of one band at delay ``tau``.

    ``ker`` and ``asymmetry`` override the model draws (used for forced
    test cases).
    """
    if ker is None:
        edges, w = _ker_sampler(model, band, tau, ker_max, ker_points)
        cdf = np.cumsum(w)
        u = rng.uniform(0.0, cdf[-1], n)
        cell = np.minimum(np.searchsorted(cdf, u, side="right"), len(w) - 1)
        ker = edges[cell] + rng.uniform(0.0, 1.0, n) * (edges[cell + 1] - edges[cell])
    ker = np.broadcast_to(np.asarray(ker, dtype=float), (n,)).copy()
    e_e = np.broadcast_to(electron_energy(band.parity, band.q, ker, model.photon_energy,
                                          model.dissociation_limit), (n,))
    if asymmetry is None:
        asymmetry = model.asymmetry(band, ker, tau)
    asym = np.broadcast_to(np.asarray(asymmetry, dtype=float), (n,))
    axis = _isotropic(rng, n)
    same = rng.uniform(0.0, 1.0, n) < 0.5 * (1.0 + asym)
    # |cos theta| in (0, 1]; theta = 90 deg has measure zero
    cos_t = np.where(same, 1.0, -1.0) * (1.0 - rng.uniform(0.0, 1.0, n))
    azimuth = rng.uniform(0.0, 2 * np.pi, n)
    p_e, p_p, p_h = kinematics(ker, e_e, axis, cos_t, azimuth)
    p_e_obs = detector_smear(p_e, smear_electron, rng)
    p_p_obs = detector_smear(p_p, smear_ion, rng)
    return GeneratedEvents(
        delay_index=np.full(n, delay_index, dtype=np.uint32), p_electron=p_e_obs, p_proton=p_p_obs,
        band_index=np.full(n, band_index, dtype=np.int16), ker=ker, electron_energy=np.array(e_e),
        asymmetry=np.array(asym), axis=axis, same_hemisphere=same, p_neutral=p_h,
    )


def sample_event(config: SimConfig, band: BandModel, rng: np.random.Generator, delay_index: int = 0):
    """One event of ``band`` at ``config.delays[delay_index]``."""
    return sample_band_events(config.model, band, 1, float(config.delays[delay_index]), rng,
                              delay_index=delay_index, smear_electron=config.smear_electron,
                              smear_ion=config.smear_ion, ker_max=config.ker_max,
                              ker_points=config.ker_points)


def delay_weights(config: SimConfig) -> np.ndarray:
    """weights[i_delay, i_band]: KER-integrated yield of each band."""
    out = np.empty((len(config.delays), len(config.model.bands)))
    for i, tau in enumerate(config.delays):
        for j, band in enumerate(config.model.bands):
            _, w = _ker_sampler(config.model, band, float(tau), config.ker_max, config.ker_points)
            out[i, j] = w.sum()
    return out


def generate(config: SimConfig) -> GeneratedEvents:
    """Draw all events; delay-major, band-minor canonical order."""
    weights = delay_weights(config)
    master, streams = delay_streams(config.rng_seed, len(config.delays))
    per_delay = master.multinomial(config.events_total, weights.sum(axis=1) / weights.sum())

    def one_delay(i):
        rng = streams[i]
        tau = float(config.delays[i])
        per_band = rng.multinomial(per_delay[i], weights[i] / weights[i].sum())
        parts = [sample_band_events(config.model, band, int(m), tau, rng, delay_index=i, band_index=j,
                                    smear_electron=config.smear_electron, smear_ion=config.smear_ion,
                                    ker_max=config.ker_max, ker_points=config.ker_points)
                 for j, (band, m) in enumerate(zip(config.model.bands, per_band))]
        return GeneratedEvents.concatenate(parts)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(one_delay, range(len(config.delays))))
    else:
        parts = [one_delay(i) for i in range(len(config.delays))]
    log.debug("generated %d events over %d delays", config.events_total, len(config.delays))
    return GeneratedEvents.concatenate(parts)


def run_simulation(config: SimConfig, truth: bool = False):
    """Generate the event file for ``config``; with ``truth`` also the truth."""
    gen = generate(config)
    ev = EventFile(config.delays, make_records(gen.delay_index, gen.p_electron, gen.p_proton),
                   config.config_hash, config.rng_seed)
    return (ev, gen) if truth else ev


def config_digest(text: str) -> bytes:
    return hashlib.sha256(text.encode()).digest()
