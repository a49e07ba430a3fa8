import math

import numpy as np
import pytest
from conftest import first_order
from suite import suite

from destab import lti, synth, verify
from destab.errors import PreconditionError

SUITE = suite()


def _gain_attack(g, k, omega0=1.0):
    form = synth.AttackForm("scalar", (synth.AllPassFactor(synth.CONSTANT, k),))
    return synth.AttackSystem(lti.StateSpace.gain([[k]]), form, omega0, k)


def test_minimal_attack_passes(plant):
    cert = verify.certify(plant, synth.synthesize(plant))
    assert cert.passed
    assert cert.closed_loop_class.tag == lti.MARGINAL
    assert abs(cert.closed_loop_class.rightmost - 1j) < 1e-12


def test_half_gain_attack_fails(plant):
    cert = verify.certify(plant, _gain_attack(plant, 0.5))
    assert not cert.passed
    assert abs(cert.minimality_residual - 0.5) < 1e-12
    assert abs(cert.destabilization_residual - 0.5) < 1e-12
    assert cert.closed_loop_class.tag == lti.HURWITZ
    assert abs(cert.closed_loop_class.rightmost - complex(-0.25, math.sqrt(1 - 0.0625))) < 1e-12


def test_overscaled_attack_fails_as_unstable(plant):
    cert = verify.certify(plant, _gain_attack(plant, 1.1))
    assert not cert.passed
    assert cert.closed_loop_class.tag == lti.UNSTABLE
    assert abs(cert.closed_loop_class.rightmost - complex(0.05, math.sqrt(1 - 0.0025))) < 1e-12


def test_ill_posed_loop_reported_not_raised():
    g = first_order(1.0, 0.0)  # s/(s+1); its D = 1 makes a unit attack ill-posed
    cert = verify.certify(g, _gain_attack(g, 1.0, omega0=math.inf))
    assert not cert.well_posed and cert.closed_loop_class is None and not cert.passed


def test_unstable_plant_rejected():
    g = first_order(0.0, 1.0, den0=-1.0)
    with pytest.raises(PreconditionError):
        verify.certify(g, _gain_attack(g, 1.0))


def test_small_gain_sweep_oscillator(plant):
    att = synth.synthesize(plant)
    assert verify.small_gain_sweep(plant, att, [0.0])[0].tag == lti.HURWITZ
    taus = [0.1 * k for k in range(1, 10)]
    classes = verify.small_gain_sweep(plant, att, taus)
    assert all(c.is_hurwitz for c in classes)
    re = [c.rightmost.real for c in classes]
    np.testing.assert_allclose(re, [(t - 1) / 2 for t in taus], atol=1e-12)
    assert np.all(np.diff(re) > 0)


def test_branch_oscillator(plant):
    branch = verify.trace_branch(plant, synth.synthesize(plant))
    eps, z = branch.eps, branch.values
    at = dict(zip(np.round(eps, 12), z))
    assert abs(at[0.0] - 1j) < 1e-9
    assert abs(at[0.1] - complex(0.05, math.sqrt(1 - 0.0025))) < 1e-12
    assert abs(branch.crossing_rate - 0.5) < 1e-6
    pos = z[eps > 0].real
    assert np.all(np.diff(pos) > 0)
    assert verify.branch_destabilizes(branch) and not branch.truncated


def test_branch_with_threads(plant, monkeypatch):
    att = synth.synthesize(plant)
    serial = verify.trace_branch(plant, att)
    monkeypatch.setenv("DESTAB_THREADS", "4")
    threaded = verify.trace_branch(plant, att)
    assert serial.values.tobytes() == threaded.values.tobytes()


def test_derivative_oscillator(plant):
    res = verify.branch_derivative_check(plant, synth.synthesize(plant))
    # lambda(s) = s/(s^2+s+1), lambda'(j) = (1 - s^2)/(s^2 + s + 1)^2 at s = j
    s = 1j
    exact = (1 - s**2) / (s**2 + s + 1) ** 2
    assert abs(res.lambda_prime - exact) < 1e-6
    assert res.lambda_prime.real < 0
    assert abs(res.zdot - 0.5) < 1e-6 and res.residual < 1e-3


def test_derivative_skipped_for_repeated_eigenvalue():
    # two decoupled copies of the oscillator: eigenvalue 1 of M is double
    g1 = lti.StateSpace([[0.0, 1.0], [-1.0, -1.0]], [[0.0], [1.0]], [[0.0, 1.0]], [[0.0]])
    a = np.kron(np.eye(2), g1.a)
    g = lti.StateSpace(a, np.kron(np.eye(2), g1.b), np.kron(np.eye(2), g1.c), np.zeros((2, 2)))
    form = synth.AttackForm("dyad")
    att = synth.AttackSystem(lti.StateSpace.gain(np.eye(2)), form, 1.0, 1.0)
    res = verify.branch_derivative_check(g, att)
    assert res.skipped and "multiplicity 2" in res.diagnostic


def test_suite_certifies_and_scaling_laws():
    taus = [0.25, 0.5, 0.75, 0.9, 0.99]
    for g in SUITE:
        att = synth.synthesize(g)
        cert = verify.certify(g, att)
        assert cert.passed
        assert abs(cert.attack_norm - att.claimed_norm) <= 1e-6 * att.claimed_norm
        assert all(c.is_hurwitz for c in verify.small_gain_sweep(g, att, taus))
        for eps in (1e-3, 1e-2, 0.1):
            loop = lti.interconnect(g, synth.scale_attack(att, eps).realization)
            assert lti.classify(loop.combined).tag == lti.UNSTABLE


def test_branch_recovers_critical_frequency_on_suite():
    for g in SUITE[:15]:
        att = synth.synthesize(g)
        branch = verify.trace_branch(g, att, eps_max=0.05, steps=11)
        z0 = dict(branch.samples)[0.0]
        assert abs(z0 - 1j * att.target_omega0) < 1e-8
