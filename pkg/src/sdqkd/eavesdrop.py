# SPDX-License-Identifier: MIT
"""Eve's success probability of eavesdropping.

Both attack structures are evaluated by explicit state evolution:

  type1 : Eve's machine entangles with the signal, Bob measures, and
          Eve discriminates her pure conditional state |gamma_ab>.
  type2 : Eve intercepts with probability 1-eta_ab and shares a
          maximally entangled pair, leaving Eve with tau_ab.

The closed form and its optimum over Eve's weights provide the
reference values; brute_force_optimum() is an independent check of
the optimum by grid search over the constraint surface.
"""

import logging
import math
import numpy as np
from scipy.optimize import brentq

from sdqkd import qmath, scenario
from sdqkd.qmath import tensor, identity, dm, partial_trace
from sdqkd.scenario import (BOB, EVE, BITS, OUTCOMES, INCONCLUSIVE,
                            STRUCT_TYPE1, STRUCT_TYPE2, STRUCTURES)

_log = logging.getLogger('eavesdrop')
_log.setLevel(logging.DEBUG)

BRANCH_INTERIOR = 'interior'
BRANCH_BOUNDARY = 'boundary'

# grid sizes used when none is requested
BRUTE_GRID = 100000
AUDIT_GRID = 1000
AUDIT_PASSES = 4  # zoomed refinements after the full audit grid
AUDIT_WINDOW = 25  # refinement half-width in current grid steps


class branch:
    """Branch selection for Eve's optimal measurement.

    Attributes:
        f0, f1 (float): Values of the branch cubics.
        kind (str): BRANCH_INTERIOR or BRANCH_BOUNDARY.
        optimal_u (tuple): Eve's optimal (u0, u1).

    """

    __slots__ = ('f0', 'f1', 'kind', 'optimal_u')

    def __init__(self, f0, f1, kind, optimal_u):
        self.f0 = float(f0)
        self.f1 = float(f1)
        self.kind = kind
        self.optimal_u = (float(optimal_u[0]), float(optimal_u[1]))

    def as_dict(self):
        return {
            'f0': self.f0,
            'f1': self.f1,
            'branch': self.kind,
            'u0': self.optimal_u[0],
            'u1': self.optimal_u[1],
        }

    def __repr__(self):
        return 'branch({}, f0={:.6g}, f1={:.6g}, u={!r})'.format(
            self.kind, self.f0, self.f1, self.optimal_u)


def success_prob_closed_form(p):
    """Return (1-eta)/(2(1-s^2)) (alpha0 u0 + alpha1 u1)."""
    return ((1.0 - p.eta_ab) / (2.0 * (1.0 - p.s * p.s)) *
            (p.alpha0 * p.u0 + p.alpha1 * p.u1))


def _check_structure(structure):
    if structure not in STRUCTURES:
        raise scenario.ParameterError(['structure'],
                                      'unknown structure ' + repr(structure))
    return structure


def eve_conditional_state(p, a, b, outputs=None):
    """Return Eve's normalised Type-I state |gamma_ab> and P(b|a).

    Bob's conclusive branch leaves the product |phi_b> x |gamma_ab>,
    Eve's factor is obtained by contracting with <phi_b|. Returns
    (None, 0.0) for a branch with zero probability.
    """
    a = scenario.check_bit(a)
    b = scenario.check_bit(b, 'b')
    kraus = scenario.bob_kraus(p.s, p.alpha0, p.alpha1, outputs)
    gamma = scenario.gamma_state(p.s, p.eta_ab, a)
    out = qmath.embed(kraus[b], gamma.rows) @ gamma
    prob = out.norm()**2
    if prob <= qmath.TOL * qmath.TOL:
        return None, 0.0
    phib = scenario.bob_output(b, outputs)
    vec = tensor(phib.dag(), identity(EVE)) @ out
    return vec / vec.norm(), prob


def conditional_states(p, a, structure=STRUCT_TYPE1, outputs=None):
    """Return Bob's outcome probabilities and Eve's conditional states.

    Returns:
        dict: b -> (P(b|a), state). For conclusive b the state is on
        Eve's space: the pure |gamma_ab> (type1) or tau_ab (type2).
        For b='?' the state is the normalised joint state of Bob and
        Eve after K?, pure for type1 and mixed for type2. A zero
        probability branch carries state None.

    """
    a = scenario.check_bit(a)
    _check_structure(structure)
    kraus = scenario.bob_kraus(p.s, p.alpha0, p.alpha1, outputs)
    ret = {}
    if structure == STRUCT_TYPE1:
        gamma = scenario.gamma_state(p.s, p.eta_ab, a)
        for b in BITS:
            ret[b] = eve_conditional_state(p, a, b, outputs)[::-1]
        out = qmath.embed(kraus[INCONCLUSIVE], gamma.rows) @ gamma
        prob = out.norm()**2
        ret[INCONCLUSIVE] = (prob, out / out.norm() if prob > 0.0 else None)
    else:
        sigma = scenario.sigma_state(p.s, p.eta_ab, a)
        for b in OUTCOMES:
            k = qmath.embed(kraus[b], sigma.rows)
            after = k @ sigma @ k.dag()
            prob = after.trace().real
            state = None
            if prob > qmath.TOL * qmath.TOL:
                if b == INCONCLUSIVE:
                    state = after / prob
                else:
                    state = scenario.tau_state(p.s, p.eta_ab, a, b)
            ret[b] = (max(prob, 0.0), state)
    return ret


def evolved_tau(p, a, b, outputs=None):
    """Return tau_ab as the partial trace of the evolved Type-II state."""
    kraus = scenario.bob_kraus(p.s, p.alpha0, p.alpha1, outputs)
    sigma = scenario.sigma_state(p.s, p.eta_ab, a)
    k = qmath.embed(kraus[b], sigma.rows)
    after = k @ sigma @ k.dag()
    prob = after.trace().real
    if prob <= qmath.TOL * qmath.TOL:
        return None
    return partial_trace(after, keep='E') / prob


def eve_outcome_prob(state, element):
    """Return Tr[(I x M) state] for Eve's POVM element M."""
    if state is None:
        return 0.0
    if state.isket:
        state = dm(state)
    if state.rows != element.rows:
        element = qmath.embed(element, state.rows)
    return max((element @ state).trace().real, 0.0)


def _success_prob(p, structure, outputs=None):
    povm = scenario.eve_povm(p.s, p.u0, p.u1)
    ret = 0.0
    for a in BITS:
        cond = conditional_states(p, a, structure, outputs)
        for b in BITS:
            prob, state = cond[b]
            ret += p.prior(a) * prob * eve_outcome_prob(state, povm[b])
    return ret


def success_prob_type1(p, outputs=None):
    """Return Eve's success probability for the Type-I structure.

    Sum over a and conclusive b of q_a P(b|a) <gamma_ab|M_b|gamma_ab>,
    evaluated by evolving |Gamma_a> through Bob's Kraus operators.
    """
    return _success_prob(p, STRUCT_TYPE1, outputs)


def success_prob_type2(p, outputs=None):
    """Return Eve's success probability for the Type-II structure.

    Sum over a and conclusive b of q_a Tr[K_b sigma_a K_b^dagger]
    Tr[tau_ab M_b].
    """
    return _success_prob(p, STRUCT_TYPE2, outputs)


def success_prob(p, structure=STRUCT_TYPE1, outputs=None):
    return _success_prob(p, _check_structure(structure), outputs)


def branch_values(q0, q1, s):
    """Return the branch cubics (f0, f1) at s."""
    r = math.sqrt(q0 * q1)
    f0 = q1 * s**3 - r * s * s - q0 * s + r
    f1 = q0 * s**3 - r * s * s - q1 * s + r
    return f0, f1


def _alphas(q0, q1, s):
    """Optimal Bob weights without the validity check."""
    if s == 0.0:
        return 1.0, 1.0
    if q0 == 0.0 or q1 == 0.0:
        return 0.0, 0.0
    return 1.0 - math.sqrt(q1 / q0) * s, 1.0 - math.sqrt(q0 / q1) * s


def _boundary_u(s, alpha0, alpha1):
    # constraint surface endpoints, ties go to the bit 0 end
    if alpha0 >= alpha1:
        return (1.0 - s * s, 0.0)
    return (0.0, 1.0 - s * s)


def branch_report(q0, q1, s):
    """Classify the optimum of Eve's weights as interior or boundary.

    Interior requires f0 > 0 and f1 > 0, with optimal weights
    u0 = 1-sqrt(alpha1/alpha0)s and u1 = 1-sqrt(alpha0/alpha1)s.
    Otherwise the optimum is the end of the constraint surface
    (1-u0)(1-u1) = s^2 favouring the larger alpha: (1-s^2, 0) or
    (0, 1-s^2), which reduce to (1,0) and (0,1) at s = 0.
    """
    q0, q1 = scenario.check_priors(q0, q1)
    s = scenario.check_overlap(s)
    f0, f1 = branch_values(q0, q1, s)
    alpha0, alpha1 = _alphas(q0, q1, s)
    if f0 > 0.0 and f1 > 0.0 and alpha0 > 0.0 and alpha1 > 0.0:
        u = (1.0 - math.sqrt(alpha1 / alpha0) * s,
             1.0 - math.sqrt(alpha0 / alpha1) * s)
        ret = branch(f0, f1, BRANCH_INTERIOR, u)
    else:
        ret = branch(f0, f1, BRANCH_BOUNDARY,
                     _boundary_u(s, alpha0, alpha1))
    _log.debug('Branch at q0=%g s=%g: %r', q0, s, ret)
    return ret


def interior_value(alpha0, alpha1, s, eta_ab):
    """Return the interior optimum for the given Bob weights."""
    return ((1.0 - eta_ab) / (2.0 * (1.0 - s * s)) *
            (alpha0 + alpha1 - 2.0 * math.sqrt(max(alpha0 * alpha1, 0.0)) * s))


def boundary_value(alpha0, alpha1, eta_ab):
    """Return the boundary optimum for the given Bob weights."""
    return (1.0 - eta_ab) / 2.0 * max(alpha0, alpha1)


def optimal_success_prob(q0, q1, s, eta_ab):
    """Return Eve's optimal success probability and its branch report.

    Raises:
        ValidityError: If s is outside the optimal measurement window.

    """
    eta_ab = scenario.check_rate('eta_ab', eta_ab)
    alpha0, alpha1 = scenario.optimal_bob_alphas(q0, q1, s)
    report = branch_report(q0, q1, s)
    if report.kind == BRANCH_INTERIOR:
        ret = interior_value(alpha0, alpha1, s, eta_ab)
    else:
        ret = boundary_value(alpha0, alpha1, eta_ab)
    return ret, report


def optimal_params(q0, s, eta_ab, q1=None):
    """Return params with Bob's and Eve's optimal weights."""
    q0, q1 = scenario.check_priors(q0, q1)
    alpha0, alpha1 = scenario.optimal_bob_alphas(q0, q1, s)
    report = branch_report(q0, q1, s)
    u0, u1 = report.optimal_u
    return scenario.params(q0=q0,
                           q1=q1,
                           s=s,
                           eta_ab=eta_ab,
                           alpha0=alpha0,
                           alpha1=alpha1,
                           u0=min(max(u0, 0.0), 1.0),
                           u1=min(max(u1, 0.0), 1.0))


def _grid_max(alpha0, alpha1, s2, lo0, hi0, lo1, hi1, grid_n):
    """Return (value, u0, u1, step) of the best feasible grid point."""
    g0 = np.linspace(lo0, hi0, grid_n)
    g1 = np.linspace(lo1, hi1, grid_n)
    u0, u1 = np.meshgrid(g0, g1, indexing='ij')
    ok = (1.0 - u0) * (1.0 - u1) >= s2 - qmath.TOL
    obj = np.where(ok, alpha0 * u0 + alpha1 * u1, -np.inf)
    i, j = np.unravel_index(int(np.argmax(obj)), obj.shape)
    step = max(hi0 - lo0, hi1 - lo1) / (grid_n - 1)
    return float(obj[i, j]), float(g0[i]), float(g1[j]), step


def _audit_grid(alpha0, alpha1, s2, grid_n):
    """Full 2-D search of the feasible square with zoomed refinement.

    Each refinement pass lays a fresh grid_n x grid_n grid over a
    window of AUDIT_WINDOW grid steps either side of the best point
    so far, so the lattice spacing shrinks by about 50/grid_n a pass.
    """
    best, c0, c1, step = _grid_max(alpha0, alpha1, s2, 0.0, 1.0, 0.0, 1.0,
                                   grid_n)
    for _ in range(AUDIT_PASSES):
        r = AUDIT_WINDOW * step
        value, u0, u1, step = _grid_max(alpha0, alpha1, s2, max(c0 - r, 0.0),
                                        min(c0 + r, 1.0), max(c1 - r, 0.0),
                                        min(c1 + r, 1.0), grid_n)
        if value > best:
            best, c0, c1 = value, u0, u1
    return best


def brute_force_optimum(q0, q1, s, eta_ab, grid_n=BRUTE_GRID, audit=False):
    """Maximise the closed form over Eve's feasible weights by grid search.

    The default search walks the constraint surface
    (1-u0)(1-u1) = s^2 with grid_n values of u0 in [0, 1-s^2], and
    includes both surface end points. With audit set, the full
    grid_n x grid_n grid over [0,1]^2 is masked by the constraint
    instead and refined by AUDIT_PASSES zoomed grids about its best
    point.

    Raises:
        ParameterError: If grid_n < 100.
        ValidityError: If s is outside the optimal measurement window.

    """
    if int(grid_n) < 100:
        raise scenario.ParameterError(['grid_n'], 'grid_n must be >= 100')
    grid_n = int(grid_n)
    eta_ab = scenario.check_rate('eta_ab', eta_ab)
    alpha0, alpha1 = scenario.optimal_bob_alphas(q0, q1, s)
    s2 = s * s
    scale = (1.0 - eta_ab) / (2.0 * (1.0 - s2))
    if audit:
        best = _audit_grid(alpha0, alpha1, s2, grid_n)
    else:
        u0 = np.linspace(0.0, 1.0 - s2, grid_n)
        room = 1.0 - u0
        with np.errstate(divide='ignore', invalid='ignore'):
            u1 = np.where(room > 0.0, 1.0 - s2 / room, 1.0)
        u1 = np.clip(u1, 0.0, 1.0)
        ends = np.array([alpha0 * (1.0 - s2), alpha1 * (1.0 - s2)])
        best = float(max(np.max(alpha0 * u0 + alpha1 * u1), np.max(ends)))
    _log.debug('Brute force q0=%g s=%g grid=%d audit=%r: %.12g', q0, s,
               grid_n, audit, scale * best)
    return scale * best


def branch_root(q0, q1=None):
    """Return the overlap where the optimum changes branch, or None.

    The smallest sign change of f0 or f1 inside the optimal
    measurement window is located with brentq.
    """
    q0, q1 = scenario.check_priors(q0, q1)
    limit = scenario.validity_limit(q0, q1)
    if limit <= 0.0:
        return None
    hi = limit * (1.0 - 1e-12)
    roots = []
    for i in (0, 1):
        f = lambda x, i=i: branch_values(q0, q1, x)[i]
        if f(0.0) > 0.0 and f(hi) < 0.0:
            roots.append(brentq(f, 0.0, hi, xtol=1e-14))
    if roots:
        return min(roots)
    return None
