import numpy as np
import pytest

from h2entangle.eventgen import SimConfig, run_simulation
from h2entangle.analysis import Binning, fill_jes_events, reduce_events
from h2entangle.model import PhysicsModel, default_bands
from h2entangle.pathways import BandModel, KerEnvelope, Parity
from h2entangle.wkb import bond_softening_path, delta_theta, ground_state_path


def test_default_bands():
    labels = [b.label for b in default_bands()]
    assert labels == ["OB17", "OB19", "OB21", "EB18", "EB20", "EB22"]


def test_period(model):
    assert model.period == pytest.approx(1.72319, abs=1e-5)
    assert model.omega == pytest.approx(1.2 / 0.6582119569, rel=1e-12)


def test_delta_theta_table_matches_direct(model, curves, dressed):
    vg, _ = curves
    for ker in (0.11, 0.6, 1.37):
        direct = delta_theta(ground_state_path(ker, vg), bond_softening_path(ker, dressed.lower, 1.2)).value
        assert model.delta_theta(ker) == pytest.approx(direct, abs=1e-4)


def test_odd_bands_share_asymmetry_at_zero_chirp(model):
    tau = np.linspace(0, model.period, 9)
    a17 = model.asymmetry(model.band("OB17"), 0.6, tau)
    a21 = model.asymmetry(model.band("OB21"), 0.6, tau)
    np.testing.assert_allclose(a17, a21, atol=1e-15)


def test_b1_off_gives_static_map(model):
    band = BandModel(Parity.Odd, 21, path_scale=(1.0, 0.0, 1.0))
    amap = model.asymmetry_map(band, np.linspace(0.1, 1.4, 14), np.linspace(0, 2 * model.period, 33))
    assert np.max(np.ptp(amap, axis=1)) < 1e-12


def test_bin_average_point_limit(model):
    band = model.band("OB19")
    tau = np.linspace(0, model.period, 16, endpoint=False)
    _, a = model.bin_average(band, 0.6, 0.6 + 1e-7, tau)
    np.testing.assert_allclose(a, model.asymmetry(band, 0.6, tau), atol=1e-5)


def test_bin_average_with_resolution_matches_simulation(model):
    # the resolution-folded prediction is what a smeared closed loop measures
    band = BandModel(Parity.Odd, 21)
    m1 = model.with_bands([band])
    tau = np.linspace(0, m1.period, 8, endpoint=False)
    ev = run_simulation(SimConfig(m1, tau, 400_000, rng_seed=21, smear_electron=0.0, smear_ion=0.3))
    red = reduce_events(ev)
    sel = (red.ker >= 0.6) & (red.ker < 0.65)
    sigma = 0.3
    _, expect = m1.bin_average(band, 0.6, 0.65, tau, momentum_sigma=sigma)
    for i in range(len(tau)):
        m = sel & (red.delay_index == i)
        n = m.sum()
        a = (2 * red.same[m].sum() - n) / n
        assert abs(a - expect[i]) < 4 * np.sqrt((1 - expect[i] ** 2) / n)


def test_mean_asymmetry_shape(model):
    kers = np.linspace(0.1, 1.0, 5)
    assert model.mean_asymmetry(model.bands[0], kers).shape == (5,)


def test_with_bands_keeps_physics(model):
    m1 = model.with_bands([BandModel(Parity.Even, 23, KerEnvelope(bs_width=0.1))])
    assert m1.delta_theta is model.delta_theta
    assert [b.label for b in m1.bands] == ["EB22"]
