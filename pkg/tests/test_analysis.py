import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfredkin import analysis
from qfredkin.analysis import FitError
from qfredkin.circuit import GateConfig, ghz_target

THETAS = np.linspace(0, 2 * np.pi, 16, endpoint=False)


def ghz2p(zeta=1.0):
    t = ghz_target("2+")
    pure = np.outer(t, t.conj())
    return zeta * pure + (1 - zeta) * np.diag(np.diag(pure))


def test_exact_truth_table():
    tt = analysis.truth_table()
    assert tt.overlap == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(tt.success, 1 / 16)
    assert np.allclose(tt.measured, tt.ideal)


def test_extinction_lowers_overlap():
    e = 0.02
    tt = analysis.truth_table(extinction=e)
    # each input row keeps the no-flip weight on the ideal output
    assert tt.overlap == pytest.approx((1 - e) ** 3, abs=1e-12)
    with pytest.raises(ValueError):
        analysis.truth_table(extinction=1.5)


def test_sampled_truth_table_is_seeded():
    a = analysis.truth_table(shots=620, seed=3, extinction=0.02)
    b = analysis.truth_table(shots=620, seed=3, extinction=0.02)
    assert np.array_equal(a.measured, b.measured)
    assert np.allclose(a.measured.sum(axis=1), 1)
    with pytest.raises(ValueError):
        analysis.truth_table(shots=10)


def test_ideal_inequality_values():
    assert analysis.mermin(ghz2p()) == pytest.approx(4.0, abs=1e-9)
    assert analysis.svetlichny(ghz2p()) == pytest.approx(4 * math.sqrt(2), abs=1e-9)
    mixed = np.eye(8) / 8
    assert analysis.mermin(mixed) == pytest.approx(0.0, abs=1e-12)
    assert analysis.svetlichny(mixed) == pytest.approx(0.0, abs=1e-12)


def test_inequalities_scale_with_coherence():
    assert analysis.mermin(ghz2p(0.9)) == pytest.approx(3.6, abs=1e-9)
    assert analysis.svetlichny(ghz2p(0.9)) == pytest.approx(0.9 * 4 * math.sqrt(2), abs=1e-9)


def test_correlator_from_counts():
    e, s = analysis.correlator_from_counts([10, 0, 0, 0, 0, 0, 0, 0])
    assert e == 1.0 and s == 0.0
    e, s = analysis.correlator_from_counts([1, 1, 0, 0, 0, 0, 0, 0])
    assert e == 0.0 and s == pytest.approx(math.sqrt(1 / 2))
    with pytest.raises(ValueError):
        analysis.correlator_from_counts([0] * 8)


def test_sampled_inequality_and_significance():
    s = analysis.sample_inequality(ghz2p(0.9), "mermin", 747, 1)
    assert sum(map(sum, s.counts)) == 747
    assert s.value == pytest.approx(3.6, abs=0.3)
    assert s.significance == pytest.approx((s.value - 2) / s.sigma)
    even, odd = [100, 0, 0, 0, 0, 0, 0, 0], [0, 100, 0, 0, 0, 0, 0, 0]
    exact = analysis.inequality_from_counts("mermin", [even, even, even, odd])
    assert exact.value == 4.0
    assert exact.significance == math.inf
    assert analysis.inequality_from_counts("mermin", [even] * 4).significance == 0.0


def test_unknown_inequality():
    with pytest.raises(ValueError):
        analysis.inequality_value(ghz2p(), "chsh")


def test_fit_visibility_recovers_cosine():
    v, s, ph = analysis.fit_visibility(THETAS, 0.5 * (1 + 0.7 * np.cos(THETAS + 0.3)))
    assert v == pytest.approx(0.7)
    assert ph == pytest.approx(0.3)
    assert s == pytest.approx(0, abs=1e-9)


def test_fit_visibility_failures():
    with pytest.raises(FitError):
        analysis.fit_visibility([0, 0, 2 * np.pi], [1, 1, 1])
    with pytest.raises(FitError):
        analysis.fit_visibility(THETAS, -np.ones_like(THETAS))
    with pytest.raises(FitError):
        analysis.swap_test_fringe([1, 0], [1, 0], [])


def test_swap_test_visibilities():
    zero, one = np.array([1, 0]), np.array([0, 1])
    plus = np.array([1, 1]) / math.sqrt(2)
    assert analysis.swap_test_fringe(zero, zero, THETAS).visibility == pytest.approx(1.0, abs=1e-8)
    assert analysis.swap_test_fringe(zero, plus, THETAS).visibility == pytest.approx(0.5, abs=1e-8)
    assert analysis.swap_test_fringe(zero, one, THETAS).visibility == pytest.approx(0.0, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_swap_test_measures_overlap(polar, azimuth):
    a = np.array([1, 0], dtype=complex)
    b = np.array([math.cos(polar / 2), np.exp(1j * azimuth) * math.sin(polar / 2)])
    overlap = abs(np.vdot(a, b)) ** 2
    assert analysis.swap_test_fringe(a, b, THETAS).visibility == pytest.approx(overlap, abs=1e-8)


def test_swap_test_with_mixed_inputs_gives_purity():
    m = 0.6
    rho = analysis.mixed_single_qubit(m)
    v = analysis.swap_test_fringe(rho, rho, THETAS).visibility
    assert v == pytest.approx(np.trace(rho @ rho).real, abs=1e-8)


@pytest.mark.parametrize("m", [0.0, 0.2, 0.5, 0.9, 1.0])
def test_mixed_state_conventions(m):
    w = analysis.mixture_weights(m)
    assert sum(w.values()) == pytest.approx(1.0, abs=1e-12)
    eq = analysis.mixed_state_run(m, THETAS, convention="equal-phase")
    anti = analysis.mixed_state_run(m, THETAS, convention="anti-phase-11")
    assert eq.visibility == pytest.approx((1 + m * m) / 2, abs=1e-8)
    assert anti.visibility == pytest.approx(m, abs=1e-8)


def test_mixed_state_validation():
    with pytest.raises(ValueError):
        analysis.mixture_weights(1.5)
    with pytest.raises(ValueError):
        analysis.mixed_state_run(0.5, THETAS, convention="other")


def test_swap_fringe_degrades_with_dephasing():
    zero = np.array([1, 0])
    v = analysis.swap_test_fringe(zero, zero, THETAS, GateConfig(zeta1=0.8)).visibility
    assert v == pytest.approx(0.8, abs=1e-8)


def test_ghz_density_matches_dephasing_model():
    rho = analysis.ghz_density(0.81, "2+", GateConfig(intrinsic_phase=0.4))
    assert analysis.mermin(rho) == pytest.approx(4 * 0.81, abs=1e-9)


def test_serializers():
    tt = analysis.truth_table()
    d = analysis.truth_table_to_json(tt)
    assert d["inputs"][5] == "101"
    assert d["overlap"] == pytest.approx(1.0)
    lines = analysis.matrix_to_csv(tt.ideal).splitlines()
    assert lines[0].startswith("input,000")
    assert len(lines) == 9
    scan = analysis.swap_test_fringe([1, 0], [1, 0], THETAS)
    assert scan.to_csv().count("\n") == len(THETAS) + 1
    assert scan.as_dict()["visibility"] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_sampled_truth_table_with_extinction_stays_in_measured_band(seed):
    tt = analysis.truth_table(shots=620, seed=seed, extinction=0.02)
    assert 0.92 <= tt.overlap <= 1.0
