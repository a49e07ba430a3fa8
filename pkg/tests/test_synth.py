import math

import numpy as np
import pytest
from conftest import first_order
from hypothesis import given, settings
from hypothesis import strategies as st
from suite import suite

from destab import hinf, lti, synth
from destab import numeric_core as nc
from destab.errors import DimensionError, PreconditionError, UnrepresentableError

SUITE = suite()


def test_real_target_gives_constant():
    f = synth.allpass_interpolant(1.0, 3.0)
    assert f.kind == synth.CONSTANT and f.gain == 1.0


@pytest.mark.parametrize("z,sigma", [(1j, 1), (-1j, -1)])
def test_imaginary_targets(z, sigma):
    f = synth.allpass_interpolant(z, 1.0)
    assert f.kind == synth.FIRST_ORDER and f.sigma == sigma and abs(f.alpha - 1.0) < 1e-15
    assert abs(f(1j) - z) < 1e-15


def test_complex_target_at_dc_is_unrepresentable():
    with pytest.raises(UnrepresentableError):
        synth.allpass_interpolant(1 + 1j, 0.0)


@given(
    st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3),
    st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3),
    st.floats(1e-2, 1e2),
)
@settings(max_examples=200, deadline=None)
def test_interpolation_and_flatness(re, im, w0):
    z = complex(re, im)
    f = synth.allpass_interpolant(z, w0)
    assert abs(f(1j * w0) - z) <= 1e-10 * abs(z)
    real = synth.realize_allpass(f)
    assert lti.classify(real).is_hurwitz
    for w in (0.0, 0.1, 1.0, 13.0, 1e4):
        assert abs(abs(lti.evaluate(real, 1j * w)[0, 0]) - abs(z)) <= 1e-10 * abs(z)


def test_realize_allpass_examples():
    assert synth.realize_allpass(synth.AllPassFactor(synth.CONSTANT, 1.0)).n == 0
    r = synth.realize_allpass(synth.AllPassFactor(synth.FIRST_ORDER, 1.0, 1, 1.0))
    np.testing.assert_array_equal([r.a[0, 0], r.b[0, 0], r.c[0, 0], r.d[0, 0]], [-1.0, 2.0, -1.0, 1.0])
    assert lti.evaluate(r, 0.0)[0, 0] == -1.0
    assert abs(lti.evaluate(r, 1e9j)[0, 0] - 1.0) < 1e-8


def test_siso_oscillator_gives_unit_gain(plant):
    att = synth.synth_siso(plant, hinf.hinf_norm(plant))
    assert att.realization.n == 0 and att.realization.d[0, 0] == 1.0
    assert att.claimed_norm == 1.0


def test_siso_doubled_plant_halves_attack(plant):
    g2 = lti.scale_output(plant, 2.0)
    att = synth.synth_siso(g2, hinf.hinf_norm(g2))
    assert att.realization.n == 0 and att.realization.d[0, 0] == 0.5


def test_siso_low_pass():
    g = first_order(0.0, 1.0)
    att = synth.synth_siso(g, hinf.hinf_norm(g))
    assert att.realization.n == 0 and abs(att.realization.d[0, 0] - 1.0) < 1e-14


def test_siso_rejects_mimo(h_plant):
    with pytest.raises(DimensionError):
        synth.synth_siso(h_plant, hinf.hinf_norm(h_plant))


def test_mimo_path_agrees_with_siso_on_scalar_plants():
    for g in SUITE:
        if g.m == 1 and g.p == 1:
            cp = hinf.hinf_norm(g)
            w0 = 1j * cp.omega0
            a = lti.evaluate(synth.synth_siso(g, cp).realization, w0)
            b = lti.evaluate(synth.synth_mimo(g, cp).realization, w0)
            assert np.allclose(a, b, atol=1e-10)


def test_counterexample_dyad(h_plant):
    att = synth.synthesize(h_plant)
    d0 = lti.evaluate(att.realization, 0.0)
    np.testing.assert_allclose(d0, [[0.0, 0.0], [1.0, 0.0]], atol=1e-14)
    h0 = lti.evaluate(h_plant, 0.0)
    assert abs(nc.determinant(np.eye(2) - d0 @ h0)) < 1e-12


def test_dyad_is_rank_one():
    for g in SUITE[:20]:
        cp = hinf.hinf_norm(g)
        att = synth.synthesize(g, cp=cp)
        sv = np.linalg.svd(lti.evaluate(att.realization, 1j * cp.omega0), compute_uv=False)
        assert abs(sv[0] - 1.0 / cp.peak) <= 1e-8 / cp.peak
        assert np.all(sv[1:] <= 1e-10 * sv[0])


def test_allpass_flatness_on_suite():
    rng = np.random.default_rng(3)
    for g in SUITE:
        if np.any(g.d):
            continue  # filtered attacks are not flat by design
        att = synth.synthesize(g)
        w = rng.uniform(0.0, 50.0, 100)
        gains = np.linalg.svd(lti.frequency_response(att.realization, w), compute_uv=False)[:, 0]
        assert np.all(np.abs(gains - att.claimed_norm) <= 1e-8 * att.claimed_norm)


def test_attacks_are_real_and_stable():
    for g in SUITE:
        d = synth.synthesize(g).realization
        for m in (d.a, d.b, d.c, d.d):
            assert m.dtype == np.float64
        assert d.n == 0 or lti.classify(d).is_hurwitz
        s = 0.3 + 0.7j
        np.testing.assert_allclose(lti.evaluate(d, s.conjugate()), np.conj(lti.evaluate(d, s)), atol=1e-14)


def test_filter_values():
    f1 = synth.wellposedness_filter(1.0)
    assert abs(lti.evaluate(f1, 1j)[0, 0] - 1.0) < 1e-15
    assert abs(abs(lti.evaluate(f1, 10j)[0, 0]) - 20.0 / 101.0) < 1e-15
    assert f1.d[0, 0] == 0.0
    f0 = synth.wellposedness_filter(0.0)
    assert lti.evaluate(f0, 0.0)[0, 0] == 1.0 and f0.d[0, 0] == 0.0


def test_filtered_attack_keeps_value_and_drops_feedthrough():
    for g in SUITE:
        if not np.any(g.d):
            continue
        cp = hinf.hinf_norm(g)
        att = synth.synthesize(g, cp=cp)
        assert not np.any(att.realization.d)
        assert att.form.filter_omega == cp.omega0
        mm = lti.evaluate(att.realization, 1j * cp.omega0) @ lti.evaluate(g, 1j * cp.omega0)
        assert nc.sigma_min(np.eye(g.m) - mm) < 1e-8


def test_near_minimal_not_triggered_for_finite_peak():
    g = first_order(1.0, 2.0)
    att = synth.synth_near_minimal(g, 0.01)
    assert att.construction != "near_minimal"
    assert abs(att.claimed_norm - 0.5) < 1e-12


def test_near_minimal_at_infinity():
    g = first_order(2.0, 1.0)
    with pytest.raises(PreconditionError, match="eps-near-minimal"):
        synth.synthesize(g)
    att = synth.synthesize(g, near_minimal_eps=0.01)
    assert att.construction == "near_minimal" and att.near_minimal_eps == 0.01
    w0 = att.target_omega0
    assert math.isfinite(w0) and hinf.gain_at(g, w0) >= 2.0 / 1.01
    assert att.claimed_norm <= 1.01 / 2.0
    assert not np.any(att.realization.d)
    mm = lti.evaluate(att.realization, 1j * w0) @ lti.evaluate(g, 1j * w0)
    assert abs(1.0 - mm[0, 0]) < 1e-10


def test_scale_attack(plant):
    att = synth.synthesize(plant)
    same = synth.scale_attack(att, 0.0)
    np.testing.assert_array_equal(same.realization.d, att.realization.d)
    up = synth.scale_attack(att, 0.1)
    assert up.realization.d[0, 0] == pytest.approx(1.1, abs=1e-15)
    assert up.claimed_norm == pytest.approx(1.1) and up.epsilon == pytest.approx(0.1)
    half = synth.scale_attack(att, -0.5)
    assert half.realization.d[0, 0] == 0.5
    with pytest.raises(PreconditionError):
        synth.scale_attack(att, -1.0)
