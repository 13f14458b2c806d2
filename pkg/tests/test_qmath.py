# SPDX-License-Identifier: MIT

import numpy as np
from numpy.testing import assert_allclose
from pytest import mark, raises
from hypothesis import given, settings
from hypothesis.strategies import integers
from scipy.stats import unitary_group

from sdqkd import qmath
from sdqkd.qmath import (space, qop, ket, bra, vector, dm, identity, tensor,
                         permute, partial_trace, embed, lift, LabelError)

B = space(('B', ('1', '2')))
E = space(('E', ('0', '1', '2')))
P = space(('P', ('p0', 'p1')))


def _random_ket(sp, rng):
    v = rng.normal(size=sp.dim) + 1j * rng.normal(size=sp.dim)
    return vector(v / np.linalg.norm(v), sp)


def test_space_labels():
    sp = B * E
    assert sp.tags == ('B', 'E')
    assert sp.dims == (2, 3)
    assert sp.dim == 6
    assert sp.offset(B='2', E='1') == 4
    assert sp.basis('E') == ('0', '1', '2')
    assert 'E' in sp
    assert len(space()) == 0
    assert space().dim == 1


def test_space_duplicate_tag():
    with raises(LabelError):
        space(('B', ('1', '2')), ('B', ('0', '1')))
    with raises(LabelError):
        B * B


def test_space_unknown_label():
    with raises(LabelError):
        B.index('X')
    with raises(LabelError):
        B.offset(B='3')
    with raises(LabelError):
        (B * E).offset(B='1')


def test_qop_is_immutable():
    op = identity(B)
    with raises(ValueError):
        op.mat[0, 0] = 2.0


def test_compose_checks_labels():
    with raises(LabelError):
        identity(B) @ identity(E)
    with raises(LabelError):
        identity(B) + identity(E)


def test_ket_and_entry():
    k = ket(B * E, B='2', E='0')
    assert k.isket
    rho = dm(k)
    assert rho.entry({'B': '2', 'E': '0'}) == 1.0
    assert rho.trace() == 1.0


def test_partial_trace_product(rng):
    x = dm(_random_ket(B, rng))
    y = dm(_random_ket(E, rng))
    rho = tensor(x, y)
    assert partial_trace(rho, keep='B').equals(x)
    assert partial_trace(rho, keep=['E']).equals(y)
    scalar = partial_trace(rho, keep=())
    assert scalar.shape == (1, 1)
    assert abs(scalar.trace() - 1.0) < 1e-12


def test_partial_trace_keeps_order(rng):
    rho = dm(_random_ket(B * E * P, rng))
    out = partial_trace(rho, keep=['P', 'B'])
    assert out.rows.tags == ('B', 'P')
    assert abs(out.trace() - 1.0) < 1e-12
    assert qmath.is_psd(out)


def test_partial_trace_unknown_tag(rng):
    rho = dm(_random_ket(B * E, rng))
    with raises(LabelError):
        partial_trace(rho, keep='X')


def test_permute_swaps_factors(rng):
    x = dm(_random_ket(B, rng))
    y = dm(_random_ket(E, rng))
    assert permute(tensor(x, y), ('E', 'B')).equals(tensor(y, x))
    kx = _random_ket(B, rng)
    ky = _random_ket(E, rng)
    assert permute(tensor(kx, ky), ('E', 'B')).equals(tensor(ky, kx))


def test_embed_places_identity(rng):
    y = dm(_random_ket(E, rng))
    assert embed(y, B * E).equals(tensor(identity(B), y))
    assert embed(y, E * B).equals(tensor(y, identity(B)))


def test_lift_bra_contracts_subsystem(rng):
    kx = _random_ket(B, rng)
    rho = tensor(dm(kx), dm(ket(P, P='p0')), dm(_random_ket(E, rng)))
    k = lift(bra(ket(P, P='p0')), rho.rows)
    assert k.rows.tags == ('B', 'E')
    out = k @ rho @ k.dag()
    assert abs(out.trace() - 1.0) < 1e-12
    assert partial_trace(out, keep='B').equals(dm(kx))


def test_lift_isometry_appends_outputs():
    out = space(('Q', ('0', '1', '2', '3')))
    v = np.zeros((4, 2))
    v[1, 0] = 1.0
    v[2, 1] = 1.0
    iso = qop(v, out, B)
    m = lift(iso, B * E)
    assert m.rows.tags == ('E', 'Q')
    assert m.cols == B * E
    assert qmath.unitarity_residual(m) < 1e-12


def test_sqrtm_psd(rng):
    k = _random_ket(E, rng)
    m = 0.3 * dm(k) + 0.1 * identity(E)
    r = qmath.sqrtm_psd(m)
    assert (r @ r).equals(m, 1e-12)
    with raises(ValueError):
        qmath.sqrtm_psd(-1.0 * identity(E))


def test_is_psd():
    assert qmath.is_psd(identity(E))
    assert not qmath.is_psd(qop(np.diag([1.0, -0.1]), B))
    assert not qmath.is_psd(qop([[0.0, 1.0], [0.0, 0.0]], B))


def test_completeness_residual():
    elements = [dm(ket(B, B='1')), dm(ket(B, B='2'))]
    assert qmath.completeness_residual(elements, B) == 0.0
    assert qmath.completeness_residual(elements[:1], B) == 1.0


def test_set_tolerance():
    tol = qmath.TOL
    psd = qmath.PSD_TOL
    try:
        qmath.set_tolerance(1e-9, 1e-8)
        assert qmath.TOL == 1e-9
        assert qmath.PSD_TOL == 1e-8
        with raises(ValueError):
            qmath.set_tolerance(0.0)
    finally:
        qmath.set_tolerance(tol, psd)


@settings(deadline=None, max_examples=30)
@given(integers(min_value=0, max_value=2**31 - 1))
def test_tensor_of_unitaries_is_unitary(seed):
    u = qop(unitary_group.rvs(2, random_state=seed), B)
    w = qop(unitary_group.rvs(3, random_state=seed + 1), E)
    assert qmath.unitarity_residual(tensor(u, w)) < 1e-12


@mark.parametrize('keep', ['B', 'E', 'P'])
def test_partial_trace_preserves_trace(rng, keep):
    rho = dm(_random_ket(B * E * P, rng))
    assert_allclose(partial_trace(rho, keep=keep).trace(), 1.0, atol=1e-12)


def test_maximally_entangled_marginal():
    from sdqkd import scenario
    phi = scenario.phi_plus()
    assert partial_trace(phi, keep='B').equals(identity(scenario.BOB) / 2.0)


def test_tensor_associative(rng):
    c = space(('C', ('0', '1')))
    x, y, z = (dm(_random_ket(sp, rng)) for sp in (B, P, c))
    assert tensor(tensor(x, y), z).equals(tensor(x, tensor(y, z)))


def test_partial_trace_of_random_products(rng):
    for _ in range(100):
        ga = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        gb = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        a = qop(ga @ ga.conj().T, B)
        b = qop(gb @ gb.conj().T, E)
        out = partial_trace(tensor(a, b), keep='B')
        assert out.equals(a * b.trace().real, 1e-10)
