# SPDX-License-Identifier: MIT

import math
import pickle
import numpy as np
from pytest import approx, mark, raises
from hypothesis import given, settings
from hypothesis.strategies import floats, integers
from scipy.stats import unitary_group

from sdqkd import qmath, scenario
from sdqkd.qmath import dm, partial_trace
from sdqkd.scenario import (params, ParameterError, ConstraintError,
                            ValidityError, INCONCLUSIVE, BITS, OUTCOMES)


def _bra_ket(x, y):
    return (x.dag() @ y).mat[0, 0]


@mark.parametrize('s', [0.0, 0.3, 0.5, 0.9])
def test_alice_states(s):
    psi0 = scenario.alice_state(s, 0)
    psi1 = scenario.alice_state(s, 1)
    assert psi0.norm() == approx(1.0)
    assert psi1.norm() == approx(1.0)
    assert _bra_ket(psi0, psi1).real == approx(s)


def test_params_lists_every_bad_field():
    with raises(ParameterError) as err:
        params(q0=1.5, s=1.0, eta_ab=-0.1)
    assert set(err.value.fields) == {'q0', 's', 'eta_ab'}


def test_params_rejects_nan_and_text():
    with raises(ParameterError) as err:
        params(s=float('nan'), alpha0='x')
    assert set(err.value.fields) == {'s', 'alpha0'}


def test_params_priors_must_sum():
    with raises(ParameterError) as err:
        params(q0=0.4, q1=0.5)
    assert set(err.value.fields) == {'q0', 'q1'}


def test_params_constraints():
    with raises(ConstraintError):
        params(s=0.5, alpha0=0.9, alpha1=0.9)
    with raises(ConstraintError):
        params(s=0.5, u0=0.75, u1=0.1)
    p = params(s=0.5, alpha0=0.5, alpha1=0.5, u0=0.75, u1=0.0)
    assert p.u(0) == 0.75


def test_params_immutable_and_replace():
    p = params(q0=0.4, s=0.5, eta_ab=0.5, alpha0=0.5, alpha1=0.5)
    with raises(AttributeError):
        p.s = 0.1
    r = p.replace(eta_ab=0.9)
    assert r.eta_ab == 0.9
    assert r.q1 == approx(0.6)
    assert p.eta_ab == 0.5
    assert p.replace(q0=0.3).q1 == approx(0.7)
    with raises(TypeError):
        p.replace(bogus=1)


def test_params_pickle():
    p = params(q0=0.4, s=0.5, eta_ab=0.5, alpha0=0.5, alpha1=0.5, u0=0.2)
    assert pickle.loads(pickle.dumps(p)) == p


def test_check_bit():
    assert scenario.check_bit(1) == 1
    with raises(ParameterError):
        scenario.check_bit(2)
    with raises(ParameterError):
        scenario.check_bit(True)


@settings(deadline=None, max_examples=50)
@given(floats(min_value=0.0, max_value=0.95))
def test_bob_povm_is_complete_and_unambiguous(s):
    povm = scenario.bob_povm(s, 1.0 - s, 1.0 - s)
    assert qmath.completeness_residual(povm.values(), scenario.BOB) < 1e-12
    for m in povm.values():
        assert qmath.is_psd(m)
    for a in BITS:
        psi = scenario.alice_state(s, a)
        for b in BITS:
            val = _bra_ket(psi, povm[b] @ psi).real
            if a == b:
                assert val == approx(1.0 - s, abs=1e-12)
            else:
                assert abs(val) < 1e-12


def test_bob_povm_infeasible():
    with raises(ConstraintError):
        scenario.bob_povm(0.5, 0.8, 0.8)


@settings(deadline=None, max_examples=30)
@given(integers(min_value=0, max_value=2**31 - 1))
def test_bob_kraus_any_outputs(seed):
    s = 0.4
    u = unitary_group.rvs(2, random_state=seed)
    kraus = scenario.bob_kraus(s, 0.5, 0.6, outputs=u)
    povm = scenario.bob_povm(s, 0.5, 0.6)
    total = sum((k.dag() @ k).mat for k in kraus.values())
    assert np.max(np.abs(total - np.eye(2))) < 1e-10
    for b in OUTCOMES:
        assert (kraus[b].dag() @ kraus[b]).equals(povm[b], 1e-10)


def test_bob_kraus_rejects_non_unitary_outputs():
    with raises(ValueError):
        scenario.bob_kraus(0.4, 0.5, 0.5, outputs=[[1.0, 0.0], [0.0, 0.5]])


def test_optimal_bob_alphas():
    assert scenario.optimal_bob_alphas(0.5, 0.5, 0.5) == approx((0.5, 0.5))
    a0, a1 = scenario.optimal_bob_alphas(0.4, 0.6, 0.5)
    assert a0 == approx(1.0 - math.sqrt(1.5) * 0.5)
    assert a1 == approx(1.0 - math.sqrt(0.4 / 0.6) * 0.5)
    assert scenario.optimal_bob_alphas(0.4, 0.6, 0.0) == (1.0, 1.0)


def test_optimal_bob_alphas_validity():
    assert scenario.validity_limit(0.4, 0.6) == approx(math.sqrt(2.0 / 3.0))
    with raises(ValidityError):
        scenario.optimal_bob_alphas(0.4, 0.6, 0.85)
    with raises(ValidityError):
        scenario.optimal_bob_alphas(1.0, 0.0, 0.1)


@mark.parametrize('s', [0.0, 0.25, 0.5, 0.75])
def test_psi_tilde(s):
    t0 = scenario.psi_tilde(s, 0)
    t1 = scenario.psi_tilde(s, 1)
    assert t0.norm() == approx(1.0)
    assert _bra_ket(t0, t1).real == approx(-s)
    assert t0.entry({'E': '0'}, {}) == 0.0


@mark.parametrize('s', [0.0, 0.3, 0.6])
def test_eve_povm_discriminates_conditional_states(s):
    u0, u1 = 0.3, 0.2
    povm = scenario.eve_povm(s, u0, u1)
    assert qmath.completeness_residual(povm.values(), scenario.EVE) < 1e-12
    assert qmath.is_psd(povm[INCONCLUSIVE])
    for b in BITS:
        rho = dm(scenario.psi_tilde(s, b))
        for e, u in ((0, u0), (1, u1)):
            val = (povm[e] @ rho).trace().real
            assert val == approx(u if e == b else 0.0, abs=1e-12)


@mark.parametrize('u0', [0.2, 0.4, 0.5])
def test_eve_povm_on_constraint_boundary(u0):
    s = 0.6
    u1 = 1.0 - s * s / (1.0 - u0)
    povm = scenario.eve_povm(s, u0, u1)
    low = float(np.min(qmath.eigvalsh(povm[INCONCLUSIVE])))
    assert abs(low) < 1e-10
    assert qmath.is_psd(povm[INCONCLUSIVE])


@mark.parametrize('s', np.linspace(0.0, 0.8, 5))
@mark.parametrize('eta', np.linspace(0.0, 1.0, 5))
def test_gamma_state_marginal_is_depolarized(s, eta):
    for a in BITS:
        gamma = scenario.gamma_state(s, eta, a)
        assert gamma.norm() == approx(1.0)
        bob = partial_trace(gamma, keep='B')
        assert bob.equals(scenario.depolarized_state(s, eta, a))
        sigma = scenario.sigma_state(s, eta, a)
        assert partial_trace(sigma, keep='B').equals(bob)
        assert sigma.trace().real == approx(1.0)


@mark.parametrize('a,b', [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_tau_state(a, b):
    tau = scenario.tau_state(0.5, 0.5, a, b)
    assert tau.trace().real == approx(1.0)
    assert qmath.is_psd(tau)
    if a != b:
        assert tau.equals(dm(scenario.psi_tilde(0.5, b)))
    else:
        # weights 0.5 on the flag and 1/3 on psi_tilde before scaling
        assert tau.entry({'E': '0'}).real == approx(0.6)


def test_draw_params(rng):
    for _ in range(50):
        p = scenario.draw_params(rng)
        assert 0.2 <= p.q0 <= 0.8
        assert p.s < scenario.validity_limit(p.q0, p.q1)
        assert scenario.feasible(p.s, p.alpha0, p.alpha1)
        assert scenario.feasible(p.s, p.u0, p.u1)
    assert scenario.draw_params(rng, q0=0.5).q0 == 0.5
