"""Run-level orchestration behind the CLI subcommands.

Each ``run_*`` function takes a resolved :class:`RunConfig`, writes its
files into ``out_dir`` and returns the summary dict that also goes into
the command's JSON file.  Every output carries the provenance block
(tool, version, config hash, seed).
"""

from __future__ import annotations

import json
import logging
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (BandSelection, Binning, InsufficientDelays, delay_scan, fill_jes_events,
                       ker_projection, reduce_events, select_band, write_jes_csv)
from .config import RunConfig, parse_orders, resolve_delays
from .eventfile import EventFile, export_csv, read_event_file, write_event_file
from .eventgen import SimConfig, run_simulation
from .fitting import (InsufficientData, RankDeficient, extract_alpha_beta, fit_cosine, fit_exponential,
                      sideband_chirp)
from .model import PhysicsModel, default_bands
from .pathways import BandModel, KerEnvelope, Parity, XuvSpectrum
from .potentials import CouplingModel

log = logging.getLogger(__name__)

TOOL = "h2entangle"
EVENT_FILE = "events.atl"


class DataError(ValueError):
    """Input data cannot support the requested analysis."""


def provenance(cfg: RunConfig, seed: int | None = None, **extra) -> dict:
    meta = {"tool": TOOL, "version": __version__, "config_hash": cfg.hash_hex,
            "seed": cfg.simulation.seed if seed is None else int(seed)}
    meta.update(extra)
    return meta


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(type(x))


def _f(x) -> str:
    return repr(float(x))


def build_model(cfg: RunConfig) -> PhysicsModel:
    p = cfg.physics
    base = Path(cfg.source).parent if cfg.source and not cfg.source.startswith("<") else Path(".")

    def path(s):
        return None if not s else str(Path(s) if Path(s).is_absolute() else base / s)

    coupling = CouplingModel(cfg.physics.coupling, p.coupling_d0, p.taper_start,
                             p.taper_end if p.taper_end > 0 else None)
    if cfg.bands:
        bands = [BandModel(Parity.parse(b.parity), b.q,
                           KerEnvelope(b.gs_amplitude, b.gs_decay, b.bs_height, b.bs_center, b.bs_width),
                           tuple(b.partial_waves), tuple(b.path_scale), label=b.name.upper())
                 for b in cfg.bands]
    else:
        bands = default_bands()
    if cfg.xuv.orders == "auto":
        orders = list(range(min(b.q for b in bands) - 2, max(b.q for b in bands) + 1, 2))
    else:
        orders = parse_orders(cfg.xuv.orders)
    phases = [float(x) for x in cfg.xuv.phases.split(",") if x.strip()] or None
    xuv = XuvSpectrum.build(orders, p.photon_energy, phases=phases, chirp_step=cfg.xuv.chirp_step)
    return PhysicsModel.build(bands, xuv, photon_energy=p.photon_energy, intensity=p.intensity,
                              dissociation_limit=p.dissociation_limit,
                              curves=p.curves,
                              vg_path=path(p.vg_file) if p.curves == "files" else None,
                              vu_path=path(p.vu_file) if p.curves == "files" else None,
                              coupling=coupling, r_max=p.r_max)


def _selections(cfg: RunConfig, model: PhysicsModel) -> list[BandSelection]:
    return [BandSelection(b.parity, b.q, model.photon_energy, model.dissociation_limit, cfg.analysis.half_width)
            for b in model.bands]


# -- model -------------------------------------------------------------------

def run_model(cfg: RunConfig, out_dir, formats=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(formats or cfg.output.formats)
    model = build_model(cfg)
    a = cfg.analysis
    kers = np.arange(a.ker_bin / 2, cfg.simulation.ker_max, a.ker_bin)
    # resolution of the reconstructed relative momentum p_H+ + p_e/2
    sigma_p = float(np.hypot(cfg.simulation.smear_ion, 0.5 * cfg.simulation.smear_electron))
    delays = np.linspace(0.0, 2 * model.period, 65)
    meta = provenance(cfg)
    summary = {"provenance": meta, "period_fs": model.period, "omega_rad_per_fs": model.omega,
               "probe_ker": a.probe_ker, "probe_momentum_sigma": sigma_p, "bands": {}}
    mean_rows = {}
    for band in model.bands:
        amap = model.asymmetry_map(band, kers, delays)
        mean_rows[band.label] = model.mean_asymmetry(band, kers)
        # same quantity the analysis fits: the probe KER bin, weighted by expected counts
        lo = np.floor(a.probe_ker / a.ker_bin + 1e-9) * a.ker_bin
        y, row = model.bin_average(band, lo, lo + a.ker_bin, delays[:-1], momentum_sigma=sigma_p)
        fit = fit_cosine(delays[:-1], row, model.omega, 1.0 / np.sqrt(y))
        summary["bands"][band.label] = {"parity": band.parity.value, "q": band.q, "probe_bin": [lo, lo + a.ker_bin],
                                        "probe_fit": fit.as_dict()}
        if "csv" in formats:
            with open(out / f"model_map_{band.label}.csv", "w") as fh:
                fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
                fh.write("ker_eV,tau_fs,A\n")
                for i, k in enumerate(kers):
                    for j, t in enumerate(delays):
                        fh.write(f"{_f(k)},{_f(t)},{_f(amap[i, j])}\n")
        if "png" in formats:
            from .plotting import map_figure
            map_figure(out / f"model_map_{band.label}.png", kers, delays, amap, xlabel="KER (eV)",
                       ylabel="delay (fs)", title=f"model A, {band.label}", cbar="A")
    if "csv" in formats:
        with open(out / "model_mean_asymmetry.csv", "w") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            labels = list(mean_rows)
            fh.write("ker_eV," + ",".join(f"mean_A_{lab}" for lab in labels) + "\n")
            for i, k in enumerate(kers):
                fh.write(_f(k) + "," + ",".join(_f(mean_rows[lab][i]) for lab in labels) + "\n")
    if "png" in formats:
        from .plotting import curves_figure
        curves_figure(out / "model_mean_asymmetry.png", kers, mean_rows, xlabel="KER (eV)",
                      ylabel="<A> over one period", title="time-averaged asymmetry")
    if "script" in formats:
        from .plotting import write_plot_script
        write_plot_script(out)
    if "json" in formats:
        _dump_json(out / "model.json", summary)
    return summary


# -- simulate ----------------------------------------------------------------

def sim_config(cfg: RunConfig, model: PhysicsModel) -> SimConfig:
    s = cfg.simulation
    return SimConfig(model, resolve_delays(cfg, model.period), s.events, rng_seed=s.seed,
                     smear_electron=s.smear_electron, smear_ion=s.smear_ion, ker_max=s.ker_max,
                     threads=s.threads, config_hash=cfg.digest())


def run_simulate(cfg: RunConfig, out_dir, formats=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(formats or cfg.output.formats)
    model = build_model(cfg)
    sc = sim_config(cfg, model)
    ev = run_simulation(sc)
    write_event_file(ev, out / EVENT_FILE)
    if "events_csv" in formats:
        export_csv(ev, out / "events.csv")
    summary = {"provenance": provenance(cfg, resolution_note="smearing widths are configuration values"),
               "event_file": EVENT_FILE, "n_events": ev.n_events,
               "delays_fs": sc.delays, "counts_per_delay": ev.counts_per_delay(),
               "smear_electron_au": sc.smear_electron, "smear_ion_au": sc.smear_ion}
    if "json" in formats:
        _dump_json(out / "simulate.json", summary)
    return summary


# -- analyze -----------------------------------------------------------------

def _try(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs), None
    except (InsufficientData, RankDeficient, InsufficientDelays, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def analyze_events(ev: EventFile, cfg: RunConfig, model: PhysicsModel) -> dict:
    """Everything the analyze command computes, as in-memory objects."""
    a = cfg.analysis
    red = reduce_events(ev)
    binning = Binning.uniform(a.ker_max, a.ee_max, a.ker_bin, a.ee_bin)
    jes = fill_jes_events(red, binning)
    sel = _selections(cfg, model)
    ker_edges = binning.ker_edges
    projections = {}
    exp_fits = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in sel:
            projections[s.label] = ker_projection(select_band(red, s), ker_edges)
    centers = binning.ker_centers
    for s in sel:
        fit, err = _try(fit_exponential, centers, projections[s.label], (a.fit_ker_min, a.fit_ker_max),
                        refine=a.refine_exponential)
        if fit is None:
            exp_fits[s.label] = {"error": err}
            continue
        ab = extract_alpha_beta(centers, projections[s.label], fit, s.parity)
        exp_fits[s.label] = {"amplitude": fit.amplitude, "decay": fit.decay,
                             "amplitude_error": fit.amplitude_error, "decay_error": fit.decay_error,
                             "bins_used": fit.n_bins, "bins_excluded": fit.n_excluded,
                             "beta_sq_center": ab.bump_center(), "alpha_sq": ab.alpha_sq, "beta_sq": ab.beta_sq}
    result = {"reduced": red, "jes": jes, "binning": binning, "selections": sel,
              "projections": projections, "exp_fits": exp_fits, "scan": None, "chirp": None,
              "probe_fits": {}, "warnings": []}
    if ev.n_events == 0:
        result["warnings"].append("event file is empty; outputs are zero-filled")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        raw, err = _try(delay_scan, red, ev.delays, sel, model.omega, ker_edges=ker_edges)
    if raw is None:
        result["warnings"].append(err)
        return result
    chirp = None
    evens = [s for s in sel if s.parity is Parity.Even]
    if a.chirp == "auto" and len(evens) >= 2:
        yields = {s.q: raw.band_yield(s.label).sum(axis=0) for s in evens}
        table, err = _try(sideband_chirp, ev.delays, yields, model.omega)
        if table is None:
            result["warnings"].append(f"chirp retrieval failed: {err}")
        else:
            chirp = table
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scan = delay_scan(red, ev.delays, sel, model.omega, ker_edges=ker_edges,
                          chirp=None if chirp is None else chirp.relative, subtract_mean=a.subtract_mean)
    result["scan"], result["chirp"] = scan, chirp
    i = scan.ker_index(a.probe_ker)
    fits = {}
    rows = [(s.label, *scan.band_asymmetry(s.label), scan.band_yield(s.label)) for s in sel]
    for parity in Parity:
        key = parity.value
        if key in scan.summed_same:
            a_sum, s_sum = scan.summed_asymmetry(parity)
            rows.append((f"sum_{key}", a_sum, s_sum, scan.summed_same[key] + scan.summed_opp[key]))
    for label, amap, _, counts in rows:
        n = counts[i]
        fit, err = _try(fit_cosine, ev.delays, amap[i], model.omega, 1.0 / np.sqrt(np.maximum(n, 1)))
        fits[label] = fit.as_dict() if fit is not None else {"error": err}
    result["probe_fits"] = fits
    return result


def run_analyze(cfg: RunConfig, events_path, out_dir, formats=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(formats or cfg.output.formats)
    ev = read_event_file(events_path)
    model = build_model(cfg)
    res = analyze_events(ev, cfg, model)
    for w in res["warnings"]:
        log.warning(w)
    meta = provenance(cfg, seed=ev.seed, event_config_hash=ev.config_hash.hex(), events=str(events_path))
    jes = res["jes"]
    centers = res["binning"].ker_centers
    if "csv" in formats:
        write_jes_csv(out / "jes.csv", jes, meta)
        with open(out / "projections.csv", "w") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write("band,parity,q,ker_eV,counts\n")
            for s in res["selections"]:
                for k, c in zip(centers, res["projections"][s.label]):
                    fh.write(f"{s.label},{s.parity.value},{s.q},{_f(k)},{int(c)}\n")
        scan = res["scan"]
        if scan is not None:
            write_scan_csv(out / "delay_scan.csv", scan, res["selections"], meta)
    if "png" in formats:
        from .analysis import asymmetry_map
        from .plotting import curves_figure, jes_figure, map_figure
        jes_figure(out / "jes.png", jes)
        am = asymmetry_map(jes)
        map_figure(out / "asymmetry_map.png", centers, res["binning"].ee_centers, am.A,
                   xlabel="KER (eV)", ylabel="electron energy (eV)", title="hemisphere asymmetry", cbar="A")
        curves_figure(out / "projections.png", centers, {k: v for k, v in res["projections"].items()},
                      xlabel="KER (eV)", ylabel="counts", title="band KER projections")
        scan = res["scan"]
        if scan is not None:
            for parity in Parity:
                if parity.value in scan.summed_same:
                    amap, _ = scan.summed_asymmetry(parity)
                    map_figure(out / f"delay_scan_{parity.value}.png", scan.ker_centers, scan.delays, amap,
                               xlabel="KER (eV)", ylabel="delay (fs)", title=f"{parity.value} bands, summed",
                               cbar="A")
    if "script" in formats:
        from .plotting import write_plot_script
        write_plot_script(out)
    summary = {
        "provenance": meta,
        "n_events": ev.n_events,
        "n_in_jes": jes.total,
        "n_out_of_range": jes.n_out_of_range,
        "band_counts": {k: int(v.sum()) for k, v in res["projections"].items()},
        "exponential_fits": {k: {kk: vv for kk, vv in v.items() if kk not in ("alpha_sq", "beta_sq")}
                             for k, v in res["exp_fits"].items()},
        "probe_ker": cfg.analysis.probe_ker,
        "probe_fits": res["probe_fits"],
        "chirp": None if res["chirp"] is None else res["chirp"].as_dict(),
        "warnings": res["warnings"],
        "config": cfg.canonical(),
    }
    if "json" in formats:
        _dump_json(out / "analysis.json", summary)
    return summary


def write_scan_csv(path, scan, selections, meta) -> None:
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("band,parity,q,ker_eV,tau_fs,n_same,n_opp,A,sigma_A\n")
        entries = [(s.label, s.parity.value, s.q, scan.same[s.label], scan.opp[s.label],
                    *scan.band_asymmetry(s.label)) for s in selections]
        for parity in Parity:
            key = parity.value
            if key in scan.summed_same:
                entries.append((f"sum_{key}", key, 0, scan.summed_same[key], scan.summed_opp[key],
                                *scan.summed_asymmetry(parity)))
        for label, par, q, ns, no, amap, sig in entries:
            for i, k in enumerate(scan.ker_centers):
                for j, t in enumerate(scan.delays):
                    fh.write(f"{label},{par},{q},{_f(k)},{_f(t)},{_f(ns[i, j])},{_f(no[i, j])},"
                             f"{_f(amap[i, j])},{_f(sig[i, j])}\n")


# -- fit ---------------------------------------------------------------------

def _read_long(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].strip().split(",")
    rows = [ln.strip().split(",") for ln in lines[1:] if ln.strip()]
    return header, rows


def _fit_rows(tau, values, omega, sigma=None):
    fit, err = _try(fit_cosine, tau, values, omega, sigma)
    return fit.as_dict() if fit is not None else {"error": err}


def run_fit(cfg: RunConfig, in_dir, out_dir) -> dict:
    """Fit the delay oscillation of every KER row, the KER envelopes and the chirp.

    ``in_dir`` holds either analysis outputs (delay_scan.csv, projections.csv)
    or model outputs (model_map_*.csv).
    """
    src = Path(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model_omega = build_model(cfg).omega
    a = cfg.analysis
    summary = {"provenance": provenance(cfg, source=str(src)), "omega_rad_per_fs": model_omega,
               "oscillation": {}, "exponential": {}, "chirp": None}
    maps = sorted(src.glob("model_map_*.csv"))
    scan_path = src / "delay_scan.csv"
    if not maps and not scan_path.exists():
        raise DataError(f"{src}: no delay_scan.csv or model_map_*.csv to fit")
    for path in maps:
        header, rows = _read_long(path)
        label = path.stem[len("model_map_"):]
        data = np.array(rows, dtype=float)
        kers = np.unique(data[:, 0])
        res = {}
        for k in kers:
            sel = data[:, 0] == k
            tau, val = data[sel, 1], data[sel, 2]
            # drop the closing sample of a whole-period grid so each phase appears once
            keep = tau < tau.min() + np.floor((np.ptp(tau) + 1e-9) / (np.pi / model_omega)) * np.pi / model_omega - 1e-9
            if keep.sum() < 5:
                keep = np.ones_like(tau, bool)
            res[f"{k:.6g}"] = _fit_rows(tau[keep], val[keep], model_omega)
        summary["oscillation"][label] = res
    if scan_path.exists():
        header, rows = _read_long(scan_path)
        labels = [r[0] for r in rows]
        qs = {r[0]: (r[1], int(r[2])) for r in rows}
        num = np.array([r[3:] for r in rows], dtype=float)
        for label in dict.fromkeys(labels):
            sel = np.array([lab == label for lab in labels])
            d = num[sel]
            res = {}
            for k in np.unique(d[:, 0]):
                r = d[d[:, 0] == k]
                n = r[:, 2] + r[:, 3]
                if n.sum() == 0:
                    continue
                res[f"{k:.6g}"] = _fit_rows(r[:, 1], r[:, 4], model_omega, 1.0 / np.sqrt(np.maximum(n, 1)))
            summary["oscillation"][label] = res
        evens = {lab: q for lab, (par, q) in qs.items() if par == "even" and not lab.startswith("sum_")}
        if len(evens) >= 2:
            yields = {}
            tau = None
            for lab, q in evens.items():
                sel = np.array([x == lab for x in labels])
                d = num[sel]
                tau = np.unique(d[:, 1])
                yields[q] = np.array([np.sum(d[d[:, 1] == t, 2] + d[d[:, 1] == t, 3]) for t in tau])
            table, err = _try(sideband_chirp, tau, yields, model_omega)
            summary["chirp"] = table.as_dict() if table is not None else {"error": err}
    # row whose KER bin holds probe_ker, for direct comparison with model.json
    probe = {}
    for label, res in summary["oscillation"].items():
        for key, fit in res.items():
            if abs(float(key) - a.probe_ker - a.ker_bin / 2) < 1e-6 and "phase" in fit:
                probe[label] = dict(fit, ker_eV=float(key))
    summary["probe"] = probe
    proj_path = src / "projections.csv"
    if proj_path.exists():
        header, rows = _read_long(proj_path)
        labels = [r[0] for r in rows]
        for label in dict.fromkeys(labels):
            d = np.array([[float(r[3]), float(r[4])] for r in rows if r[0] == label])
            par = next(r[1] for r in rows if r[0] == label)
            fit, err = _try(fit_exponential, d[:, 0], d[:, 1], (a.fit_ker_min, a.fit_ker_max),
                            refine=a.refine_exponential)
            if fit is None:
                summary["exponential"][label] = {"error": err}
            else:
                ab = extract_alpha_beta(d[:, 0], d[:, 1], fit, par)
                summary["exponential"][label] = {"amplitude": fit.amplitude, "decay": fit.decay,
                                                 "amplitude_error": fit.amplitude_error,
                                                 "decay_error": fit.decay_error,
                                                 "beta_sq_center": ab.bump_center()}
    _dump_json(out / "fit.json", summary)
    return summary


# -- selfcheck ---------------------------------------------------------------

def run_selfcheck(cfg: RunConfig, seed: int | None = None):
    from .acceptance import run_all
    return run_all(seed=seed)
