import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from h2entangle.fitting import fit_cosine, wrap_phase
from h2entangle.pathways import (
    BelowThreshold, FinalState, MissingHarmonic, Parity, PathwaySpec, XuvSpectrum, ZeroState,
    assemble, assemble_even, assemble_odd, asymmetry, asymmetry_even, asymmetry_odd,
    asymmetry_of_state, concurrence, dissociation_probability, electron_energy, time_average_asymmetry,
    two_path_asymmetry,
)

XUV = XuvSpectrum.build([15, 17, 19, 21, 23])
OMEGA = 1.2 / 0.6582119569


def spec(parity="odd", mags=(1.0, 1.0, 1.0), tg=0.0, tb=0.0, waves=(1, 0, 0), xuv=XUV, q=21):
    return PathwaySpec(Parity.parse(parity), q, 0.6, mags, tg, tb, xuv, waves)


specs = st.builds(
    lambda par, m, tg, tb, waves, chirp, q: spec(par, m, tg, tb, waves, XuvSpectrum.build([15, 17, 19, 21, 23],
                                                                                        chirp_step=chirp), q),
    st.sampled_from(["odd", "even"]),
    st.tuples(*[st.floats(0.0, 3.0)] * 3).filter(lambda m: sum(m) > 1e-3),
    st.floats(-50, 50), st.floats(-50, 50),
    st.tuples(*[st.integers(0, 3)] * 3),
    st.floats(-2, 2),
    st.sampled_from([17, 19, 21, 23]),
)


def test_electron_energy():
    assert electron_energy("odd", 21, 0.0) == pytest.approx(7.1)
    assert electron_energy("odd", 21, 0.6) == pytest.approx(6.5)
    assert electron_energy("even", 21, 0.6) == pytest.approx(5.3)
    with pytest.raises(BelowThreshold):
        electron_energy("odd", 21, 21 * 1.2 - 18.1)


def test_xuv_validation():
    with pytest.raises(ValueError):
        XuvSpectrum.build([17, 21])
    with pytest.raises(ValueError):
        XuvSpectrum.build([18, 20])
    x = XuvSpectrum.build([17, 19, 21], chirp_step=0.4)
    assert x.chirp(19) == pytest.approx(0.4)
    assert x.chirp(21) == pytest.approx(0.8)
    with pytest.raises(MissingHarmonic):
        spec(xuv=XuvSpectrum.build([21]), q=21).xuv.chirp(21)


def test_missing_harmonic():
    s = spec(xuv=XuvSpectrum.build([21, 23]), q=21)
    with pytest.raises(MissingHarmonic):
        assemble_odd(s, 0.0)


def test_worked_odd_example():
    s = spec("odd", (1, 1, 1), 0.0, 0.0, (1, 0, 0))
    st_ = assemble_odd(s, 0.0)
    assert np.angle(st_.c_gs) == pytest.approx(np.pi) or np.angle(st_.c_gs) == pytest.approx(-np.pi)
    assert st_.c_bs == pytest.approx(2.0)
    assert asymmetry_of_state(st_) == pytest.approx(0.8, abs=1e-15)
    assert asymmetry_odd(s, 0.0) == pytest.approx(0.8, abs=1e-15)


def test_single_path_odd_is_product_state():
    st_ = assemble_odd(spec(mags=(1.0, 0.0, 0.0)), 0.3)
    assert st_.c_bs == 0
    assert asymmetry_of_state(st_) == 0.0
    assert concurrence(st_) == 0.0


def test_odd_periodicity_of_coherence():
    s = spec(mags=(0.7, 0.4, 0.9), tg=1.3, tb=0.2)
    for tau in (0.0, 0.31, 1.7):
        a, b = assemble_odd(s, tau), assemble_odd(s, tau + s.period)
        assert a.c_bs * np.conj(a.c_gs) == pytest.approx(b.c_bs * np.conj(b.c_gs), abs=1e-12)


def test_even_pure_state():
    s = spec("even", (1.0, 0.0, 0.0), waves=(0, 0, 1))
    assert asymmetry_even(s, 0.4) == 0.0


def test_even_two_slit_closure():
    s = spec("even", (0.8, 0.8, 0.0), waves=(0, 0, 1))
    tau = np.linspace(0, 2, 41)
    st_ = assemble_even(s, tau)
    np.testing.assert_allclose(np.abs(st_.c_gs), 2 * 0.8 * np.abs(np.cos(OMEGA * tau)), atol=1e-12)
    p = dissociation_probability(s, tau)
    np.testing.assert_allclose(p, 4 * 0.64 * np.cos(OMEGA * tau) ** 2, atol=1e-12)


def _parity_phase_gap(waves_odd, waves_even):
    tau = np.linspace(0, np.pi / OMEGA, 64, endpoint=False)
    odd = spec("odd", (1.0, 0.5, 0.5), waves=waves_odd)
    even = spec("even", (0.5, 0.5, 1.0), waves=waves_even)
    f_o = fit_cosine(tau, asymmetry(odd, tau), OMEGA)
    f_e = fit_cosine(tau, asymmetry(even, tau), OMEGA)
    return abs(wrap_phase(f_o.phase - f_e.phase))


def test_odd_even_out_of_phase():
    assert abs(_parity_phase_gap((1, 1, 1), (1, 1, 1)) - np.pi) < 1e-9


def test_parity_dependent_waves_cancel_the_shift():
    # lowest-wave-per-parity choice: the pi*l/2 offsets undo the pi between bands
    assert _parity_phase_gap((1, 0, 0), (0, 0, 1)) < 1e-9


def test_asymmetry_of_state_examples():
    assert asymmetry_of_state(FinalState(1.0, 0.0, Parity.Odd)) == 0.0
    assert asymmetry_of_state(FinalState(1.0, 1.0, Parity.Odd)) == -1.0
    assert asymmetry_of_state(FinalState(1.0, 1j, Parity.Odd)) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(ZeroState):
        asymmetry_of_state(FinalState(0.0, 0.0, Parity.Odd))


def test_two_path_form_matches_state():
    rng = np.random.default_rng(5)
    for _ in range(100):
        a = rng.normal() + 1j * rng.normal()
        b = rng.normal() + 1j * rng.normal()
        tau = rng.uniform(-3, 3)
        state = FinalState(a, b * np.exp(2j * OMEGA * tau), Parity.Odd)
        assert two_path_asymmetry(a, b, tau) == pytest.approx(asymmetry_of_state(state), abs=1e-12)


def test_limits():
    tau = np.linspace(0, 2, 64)
    assert np.all(asymmetry_odd(spec(mags=(0.0, 1.0, 0.5)), tau) == 0.0)
    a = asymmetry_odd(spec(mags=(1.0, 0.0, 0.5), tg=0.4), tau)
    assert np.ptp(a) < 1e-12
    assert abs(time_average_asymmetry(spec(mags=(1.0, 0.7, 0.0), tg=0.4), 64)) < 1e-10
    s = spec(mags=(1.0, 0.0, 0.5), tg=0.4)
    assert time_average_asymmetry(s, 32) == pytest.approx(a[0], abs=1e-14)


def test_time_average_riemann_oracle():
    s = spec(mags=(1.0, 0.6, 0.3), tg=2.1, tb=0.3)
    tau = (np.arange(100_000) + 0.5) * s.period / 100_000
    assert time_average_asymmetry(s, 64) == pytest.approx(np.mean(asymmetry(s, tau)), abs=1e-6)
    with pytest.raises(ValueError):
        time_average_asymmetry(s, 8)


def test_dissociation_probability():
    assert dissociation_probability(spec(mags=(0.0, 0.0, 0.0)), 0.0) == 0.0
    assert dissociation_probability(spec(mags=(0.0, 1.5, 0.0)), 0.2) == pytest.approx(2.25)
    s = spec(mags=(1.0, 1.0, 1.0))
    coh = dissociation_probability(s, 0.0, coherent=True)
    assert coh == pytest.approx(abs(-1 + 2) ** 2)


def test_concurrence_examples():
    assert concurrence(FinalState(1.0, 1j, Parity.Odd)) == pytest.approx(1.0)
    assert concurrence(FinalState(2.0, 1.0, Parity.Odd)) == pytest.approx(0.8)
    assert concurrence(FinalState(1.0, 0.0, Parity.Even)) == 0.0


def test_chirp_shifts_extremum():
    # a chirp step delays the odd-band oscillation by chirp / (2 omega)
    tau = np.linspace(0, np.pi / OMEGA, 4001)
    base = spec(mags=(1.0, 0.8, 0.0))
    shifted = spec(mags=(1.0, 0.8, 0.0), xuv=XuvSpectrum.build([15, 17, 19, 21, 23], chirp_step=0.3))
    f0 = fit_cosine(tau[:-1], asymmetry(base, tau[:-1]), OMEGA)
    f1 = fit_cosine(tau[:-1], asymmetry(shifted, tau[:-1]), OMEGA)
    dphi = shifted.xuv.chirp(21)
    assert wrap_phase(f0.phase - f1.phase) == pytest.approx(wrap_phase(dphi), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(specs, st.floats(-5, 5))
def test_range_and_bound(s, tau):
    state = assemble(s, tau)
    a = asymmetry_of_state(state)
    assert -1 - 1e-12 <= a <= 1 + 1e-12
    assert abs(a) <= concurrence(state) + 1e-12


@settings(max_examples=300, deadline=None)
@given(specs)
def test_closed_form_equals_state(s):
    tau = np.linspace(-2, 2, 64)
    np.testing.assert_allclose(asymmetry(s, tau), asymmetry_of_state(assemble(s, tau)), rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(specs, st.floats(-5, 5))
def test_periodicity(s, tau):
    assert asymmetry(s, tau + s.period) == pytest.approx(asymmetry(s, tau), abs=1e-12)


def test_bound_saturated_for_real_coherence():
    st_ = FinalState(0.6, -1.3, Parity.Odd)
    assert abs(asymmetry_of_state(st_)) == pytest.approx(concurrence(st_), abs=1e-15)


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(mags=(-1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        spec(mags=(1.0, 0.0))
