import numpy as np
import pytest

from h2entangle.analysis import energies, reconstruct_molecular_frame, reconstruct_neutral
from h2entangle.constants import HARTREE_EV
from h2entangle.eventfile import to_bytes
from h2entangle.eventgen import (
    SimConfig, delay_streams, delay_weights, detector_smear, generate, kinematics, run_simulation,
    sample_band_events, sample_event,
)
from h2entangle.pathways import BandModel, BelowThreshold, Parity


@pytest.fixture(scope="module")
def delays(model):
    return np.linspace(0.0, model.period, 8, endpoint=False)


def test_unit_conversions():
    axis = np.array([[0.0, 0.0, 1.0]])
    p_e, p_p, p_h = kinematics(np.array([0.6]), np.array([6.5]), axis, np.array([1.0]), np.array([0.0]))
    p_mf = reconstruct_molecular_frame(p_p, p_e)
    assert np.linalg.norm(p_mf) == pytest.approx(np.sqrt(1836.15 * 0.6 / 27.2114), rel=1e-3)
    assert np.linalg.norm(p_mf) == pytest.approx(6.36, abs=5e-3)
    assert np.linalg.norm(p_e) == pytest.approx(np.sqrt(2 * 6.5 / 27.2114), rel=1e-4)
    assert np.linalg.norm(p_e) == pytest.approx(0.691, abs=5e-4)


def test_unsmeared_roundtrip(model):
    rng = np.random.default_rng(0)
    band = model.bands[0]
    ev = sample_band_events(model, band, 5000, 0.3, rng)
    total = ev.p_electron + ev.p_proton + ev.p_neutral
    assert np.max(np.abs(total)) < 1e-12
    ker, ee = energies(ev.p_electron, ev.p_proton)
    np.testing.assert_allclose(ker, ev.ker, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ee, ev.electron_energy, rtol=1e-12)
    np.testing.assert_allclose(reconstruct_neutral(ev.p_proton, ev.p_electron), ev.p_neutral, atol=1e-12)


def test_forced_full_asymmetry(model):
    rng = np.random.default_rng(1)
    ev = sample_band_events(model, model.bands[0], 2000, 0.0, rng, asymmetry=np.ones(2000))
    p_mf = reconstruct_molecular_frame(ev.p_proton, ev.p_electron)
    assert np.all(np.sum(ev.p_electron * p_mf, axis=1) > 0)
    ev = sample_band_events(model, model.bands[0], 2000, 0.0, rng, asymmetry=-np.ones(2000))
    p_mf = reconstruct_molecular_frame(ev.p_proton, ev.p_electron)
    assert np.all(np.sum(ev.p_electron * p_mf, axis=1) < 0)


def test_hemisphere_estimator_converges(model):
    rng = np.random.default_rng(2)
    n = 200_000
    ev = sample_band_events(model, model.bands[0], n, 0.4, rng, ker=np.full(n, 0.6))
    a_star = ev.asymmetry[0]
    same = ev.same_hemisphere
    est = (same.sum() - (~same).sum()) / n
    assert abs(est - a_star) < 3 * np.sqrt((1 - a_star**2) / n)


def test_below_threshold(model):
    band = BandModel(Parity.Odd, 15)
    with pytest.raises(BelowThreshold):
        sample_band_events(model, band, 10, 0.0, np.random.default_rng(0), ker=np.full(10, 1.0))


def test_smear_identity_and_statistics():
    rng = np.random.default_rng(4)
    p = rng.normal(size=(10, 3))
    np.testing.assert_array_equal(detector_smear(p, 0.0, rng), p)
    n = 1_000_000
    d = detector_smear(np.zeros((n, 1)), 0.3, rng)[:, 0]
    assert np.var(d) == pytest.approx(0.09, rel=0.01)
    assert abs(np.mean(d)) < 5 * 0.3 / np.sqrt(n)
    with pytest.raises(ValueError):
        detector_smear(p, -1.0, rng)


def test_momentum_sum_width(model, delays):
    ev, gen = run_simulation(SimConfig(model, delays, 100_000, rng_seed=5, smear_electron=0.05,
                                       smear_ion=0.3), truth=True)
    total = ev.p_electron + ev.p_proton + gen.p_neutral
    np.testing.assert_allclose(np.var(total, axis=0), 0.05**2 + 0.3**2, rtol=0.02)


def test_config_validation(model):
    with pytest.raises(ValueError):
        SimConfig(model, [], 10)
    with pytest.raises(ValueError):
        SimConfig(model, [0.0], 0)
    with pytest.raises(ValueError):
        SimConfig(model, [0.0], 10, smear_ion=-1.0)


def test_byte_identical_reruns(model, delays):
    cfg = SimConfig(model, delays, 50_000, rng_seed=9)
    a = to_bytes(run_simulation(cfg))
    assert a == to_bytes(run_simulation(cfg))
    threaded = SimConfig(model, delays, 50_000, rng_seed=9, threads=4)
    assert a == to_bytes(run_simulation(threaded))
    assert a != to_bytes(run_simulation(SimConfig(model, delays, 50_000, rng_seed=10)))


def test_events_follow_delay_weights(model, delays):
    cfg = SimConfig(model, delays, 200_000, rng_seed=3)
    counts = np.bincount(generate(cfg).delay_index, minlength=len(delays))
    w = delay_weights(cfg).sum(axis=1)
    expect = 200_000 * w / w.sum()
    assert np.all(np.abs(counts - expect) < 5 * np.sqrt(expect))


def test_doubling_events_doubles_counts(model, delays):
    c1 = np.bincount(generate(SimConfig(model, delays, 100_000, rng_seed=1)).delay_index, minlength=8)
    c2 = np.bincount(generate(SimConfig(model, delays, 200_000, rng_seed=2)).delay_index, minlength=8)
    assert np.all(np.abs(c2 - 2 * c1) < 5 * np.sqrt(c2 + 4 * c1))


def test_streams_independent():
    master, streams = delay_streams(7, 3)
    draws = [s.uniform(size=4) for s in streams]
    assert not np.allclose(draws[0], draws[1])
    _, again = delay_streams(7, 3)
    np.testing.assert_array_equal(again[2].uniform(size=4), draws[2])


def test_sample_event_single(model, delays):
    cfg = SimConfig(model, delays, 10, smear_electron=0.0, smear_ion=0.0)
    ev = sample_event(cfg, model.bands[1], np.random.default_rng(0), delay_index=2)
    assert len(ev) == 1 and ev.delay_index[0] == 2
    assert 0.0 <= ev.ker[0] <= cfg.ker_max


def test_ker_samples_follow_envelope(model):
    band = model.bands[0]
    ev = sample_band_events(model, band, 400_000, 0.0, np.random.default_rng(8))
    edges = np.linspace(0, 1.5, 31)
    hist, _ = np.histogram(ev.ker, edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    fine = np.linspace(0, 1.5, 30001)
    y = model.band_yield(band, fine, 0.0)
    expect = np.array([y[(fine >= a) & (fine < b)].mean() for a, b in zip(edges[:-1], edges[1:])])
    expect *= 400_000 / expect.sum()
    assert np.all(np.abs(hist - expect) < 5 * np.sqrt(expect) + 1)
    assert mid.size == hist.size
