# SPDX-License-Identifier: MIT
"""Analytic model objects: states, channel, measurements.

Bob's qubit lives on the space B with basis {|1>, |2>}. Eve's machine
lives on E with basis {|0>, |1>, |2>}: the flag |0> plus a copy of the
qubit span. All constructed vectors are real with a positive leading
amplitude.

Measurement outcomes are labelled 0, 1 and INCONCLUSIVE ('?').
"""

import logging
import math
import numpy as np

from sdqkd import qmath
from sdqkd.qmath import space, qop, ket, vector, dm, identity, tensor

_log = logging.getLogger('scenario')
_log.setLevel(logging.DEBUG)

BOB = space(('B', ('1', '2')))
EVE = space(('E', ('0', '1', '2')))
BOBEVE = BOB * EVE

INCONCLUSIVE = '?'
BITS = (0, 1)
OUTCOMES = (0, 1, INCONCLUSIVE)

STRUCT_TYPE1 = 'type1'
STRUCT_TYPE2 = 'type2'
STRUCTURES = (STRUCT_TYPE1, STRUCT_TYPE2)

NOISE_WHITE = 'white'
NOISE_COLORED = 'colored'
NOISE_KINDS = (NOISE_WHITE, NOISE_COLORED)


class ParameterError(ValueError):
    """One or more model parameters are out of range.

    The names of all offending fields are listed in fields.
    """

    def __init__(self, fields, detail=None):
        self.fields = tuple(fields)
        msg = 'Invalid parameter: ' + ', '.join(self.fields)
        if detail:
            msg += ' (' + detail + ')'
        ValueError.__init__(self, msg)


class ConstraintError(ValueError):
    """Measurement weights violate the unambiguity constraint."""
    pass


class ValidityError(ValueError):
    """Overlap outside the validity window of the optimal measurement."""
    pass


def _bad_unit(v, upper_open=False):
    """Return True if v is not a number in [0,1] (or [0,1))."""
    try:
        v = float(v)
    except (TypeError, ValueError):
        return True
    if math.isnan(v) or v < 0.0:
        return True
    if upper_open:
        return v >= 1.0
    return v > 1.0


def check_overlap(s):
    if _bad_unit(s, upper_open=True):
        raise ParameterError(['s'], 's must be in [0,1): ' + repr(s))
    return float(s)


def check_rate(name, v):
    if _bad_unit(v):
        raise ParameterError([name], '{} must be in [0,1]: {!r}'.format(
            name, v))
    return float(v)


def check_bit(a, name='a'):
    if a not in BITS or isinstance(a, bool):
        raise ParameterError([name], '{} must be 0 or 1: {!r}'.format(
            name, a))
    return int(a)


def check_priors(q0, q1=None):
    """Return validated (q0, q1), q1 defaulting to 1 - q0."""
    bad = []
    if _bad_unit(q0):
        bad.append('q0')
    if q1 is None:
        if not bad:
            q1 = 1.0 - float(q0)
    elif _bad_unit(q1):
        bad.append('q1')
    if not bad and abs(float(q0) + float(q1) - 1.0) > qmath.TOL:
        bad.extend(['q0', 'q1'])
    if bad:
        raise ParameterError(bad, 'priors must be non-negative and sum to 1')
    return float(q0), float(q1)


def feasible(s, w0, w1, tol=None):
    """Return True if (1-w0)(1-w1) >= s^2 within tol."""
    if tol is None:
        tol = qmath.TOL
    return (1.0 - w0) * (1.0 - w1) >= s * s - tol


class params:
    """Free parameters of the analytic model.

    Args:
        q0 (float): Prior of Alice's bit 0.
        s (float): Overlap of Alice's states, in [0,1).
        eta_ab (float): Channel efficiency, in [0,1].
        alpha0, alpha1 (float): Bob's conclusive weights.
        u0, u1 (float): Eve's conclusive weights.
        q1 (float, optional): Prior of bit 1, checked against q0.

    Raises:
        ParameterError: Listing every field out of range.
        ConstraintError: If Bob's or Eve's weights are infeasible.

    """

    __slots__ = ('_q0', '_q1', '_s', '_eta_ab', '_alpha0', '_alpha1', '_u0',
                 '_u1')
    FIELDS = ('q0', 'q1', 's', 'eta_ab', 'alpha0', 'alpha1', 'u0', 'u1')

    def __init__(self,
                 q0=0.5,
                 s=0.0,
                 eta_ab=1.0,
                 alpha0=0.0,
                 alpha1=0.0,
                 u0=0.0,
                 u1=0.0,
                 q1=None):
        bad = []
        if _bad_unit(q0):
            bad.append('q0')
        if q1 is not None and _bad_unit(q1):
            bad.append('q1')
        if _bad_unit(s, upper_open=True):
            bad.append('s')
        for name, v in (('eta_ab', eta_ab), ('alpha0', alpha0),
                        ('alpha1', alpha1), ('u0', u0), ('u1', u1)):
            if _bad_unit(v):
                bad.append(name)
        if bad:
            raise ParameterError(bad)
        q0, q1 = check_priors(q0, q1)
        s = float(s)
        if not feasible(s, float(alpha0), float(alpha1)):
            raise ConstraintError(
                'Bob weights infeasible: (1-{})(1-{}) < {}^2'.format(
                    alpha0, alpha1, s))
        if not feasible(s, float(u0), float(u1)):
            raise ConstraintError(
                'Eve weights infeasible: (1-{})(1-{}) < {}^2'.format(
                    u0, u1, s))
        object.__setattr__(self, '_q0', q0)
        object.__setattr__(self, '_q1', q1)
        object.__setattr__(self, '_s', s)
        object.__setattr__(self, '_eta_ab', float(eta_ab))
        object.__setattr__(self, '_alpha0', float(alpha0))
        object.__setattr__(self, '_alpha1', float(alpha1))
        object.__setattr__(self, '_u0', float(u0))
        object.__setattr__(self, '_u1', float(u1))

    def __setattr__(self, name, value):
        raise AttributeError('params are immutable')

    def __reduce__(self):
        return (params, (self._q0, self._s, self._eta_ab, self._alpha0,
                         self._alpha1, self._u0, self._u1, self._q1))

    q0 = property(lambda self: self._q0)
    q1 = property(lambda self: self._q1)
    s = property(lambda self: self._s)
    eta_ab = property(lambda self: self._eta_ab)
    alpha0 = property(lambda self: self._alpha0)
    alpha1 = property(lambda self: self._alpha1)
    u0 = property(lambda self: self._u0)
    u1 = property(lambda self: self._u1)

    def prior(self, a):
        return self._q0 if check_bit(a) == 0 else self._q1

    def alpha(self, b):
        return self._alpha0 if check_bit(b, 'b') == 0 else self._alpha1

    def u(self, e):
        return self._u0 if check_bit(e, 'e') == 0 else self._u1

    def replace(self, **kw):
        """Return a copy with the named fields replaced."""
        vals = self.as_dict()
        for k in kw:
            if k not in vals:
                raise TypeError('Unknown parameter: ' + repr(k))
        vals.update(kw)
        if 'q0' in kw and 'q1' not in kw:
            vals['q1'] = None
        return params(**vals)

    def as_dict(self):
        return {f: getattr(self, f) for f in self.FIELDS}

    def __eq__(self, other):
        if not isinstance(other, params):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(tuple(self.as_dict().items()))

    def __repr__(self):
        return 'params({})'.format(', '.join(
            '{}={!r}'.format(k, v) for k, v in self.as_dict().items()))


def draw_params(rng, q0=None):
    """Return random feasible params drawn with numpy generator rng.

    Bob's and Eve's weights are drawn on the feasible region, with
    the overlap kept inside the optimal measurement window.
    """
    if q0 is None:
        q0 = rng.uniform(0.2, 0.8)
    limit = validity_limit(q0, 1.0 - q0)
    s = rng.uniform(0.0, 0.95 * limit)

    def pair():
        w0 = rng.uniform(0.0, 1.0 - s)
        w1 = rng.uniform(0.0, 1.0 - s * s / (1.0 - w0))
        return w0, w1

    alpha0, alpha1 = pair()
    u0, u1 = pair()
    return params(q0=q0,
                  s=s,
                  eta_ab=rng.uniform(0.0, 1.0),
                  alpha0=alpha0,
                  alpha1=alpha1,
                  u0=u0,
                  u1=u1)


def alice_state(s, a):
    """Return Alice's state |psi_a> on Bob's qubit."""
    s = check_overlap(s)
    sign = -1.0 if check_bit(a) else 1.0
    return vector([math.sqrt((1.0 + s) / 2.0),
                   sign * math.sqrt((1.0 - s) / 2.0)], BOB)


def depolarized_state(s, eta_ab, a):
    """Return Alice's state after the depolarizing channel."""
    eta_ab = check_rate('eta_ab', eta_ab)
    psi = dm(alice_state(s, a))
    return eta_ab * psi + (1.0 - eta_ab) * identity(BOB) / 2.0


def phi_plus():
    """Return (|11> + |22>)/sqrt(2) on Bob and Eve."""
    v = np.zeros(BOBEVE.dim)
    v[BOBEVE.offset(B='1', E='1')] = 1.0
    v[BOBEVE.offset(B='2', E='2')] = 1.0
    return vector(v / math.sqrt(2.0), BOBEVE)


def gamma_state(s, eta_ab, a):
    """Return the Type-I joint state of Bob and Eve's machine."""
    eta_ab = check_rate('eta_ab', eta_ab)
    flag = ket(EVE, E='0')
    return (math.sqrt(eta_ab) * tensor(alice_state(s, a), flag) +
            math.sqrt(1.0 - eta_ab) * phi_plus())


def sigma_state(s, eta_ab, a):
    """Return the Type-II mixed state of Bob and Eve."""
    eta_ab = check_rate('eta_ab', eta_ab)
    flag = dm(ket(EVE, E='0'))
    return (eta_ab * tensor(dm(alice_state(s, a)), flag) +
            (1.0 - eta_ab) * dm(phi_plus()))


def _dual(s, b, sp, offset=0):
    """Return the unnormalised vector dual to Alice's states.

    <psi_a|dual_b> = delta_ab and |dual_b|^2 = 1/(1-s^2).
    """
    sign = -1.0 if b else 1.0
    v = np.zeros(sp.dim)
    v[offset] = 1.0 / math.sqrt(2.0 * (1.0 + s))
    v[offset + 1] = sign / math.sqrt(2.0 * (1.0 - s))
    return vector(v, sp)


def bob_povm(s, alpha0, alpha1):
    """Return Bob's POVM {0: M0, 1: M1, '?': M?}.

    Raises:
        ConstraintError: If (1-alpha0)(1-alpha1) < s^2.

    """
    s = check_overlap(s)
    alpha0 = check_rate('alpha0', alpha0)
    alpha1 = check_rate('alpha1', alpha1)
    if not feasible(s, alpha0, alpha1):
        raise ConstraintError(
            'Bob weights infeasible: (1-{})(1-{}) < {}^2'.format(
                alpha0, alpha1, s))
    ret = {}
    for b, w in ((0, alpha0), (1, alpha1)):
        ret[b] = w * dm(_dual(s, b, BOB))
    ret[INCONCLUSIVE] = identity(BOB) - ret[0] - ret[1]
    return ret


def bob_kraus(s, alpha0, alpha1, outputs=None):
    """Return Bob's Kraus operators {0: K0, 1: K1, '?': K?}.

    K_b = sqrt(alpha_b)|phi_b><alpha_b| for conclusive b, with the
    output states |phi_b> taken from the columns of outputs (identity
    by default, ie |phi_0>=|1>, |phi_1>=|2>). K? is outputs applied
    to the PSD square root of M?.

    Args:
        s (float): Overlap.
        alpha0, alpha1 (float): Conclusive weights.
        outputs (array, optional): 2x2 unitary of output states.

    Raises:
        ConstraintError: If the weights are infeasible.

    """
    povm = bob_povm(s, alpha0, alpha1)
    w = _outputs(outputs)
    ret = {}
    for b, alpha in ((0, alpha0), (1, alpha1)):
        phi = bob_output(b, outputs)
        ret[b] = math.sqrt(alpha) * (phi @ _dual(s, b, BOB).dag())
    ret[INCONCLUSIVE] = w @ qmath.sqrtm_psd(povm[INCONCLUSIVE])
    return ret


def _outputs(outputs):
    if outputs is None:
        return identity(BOB)
    w = qop(outputs, BOB)
    if qmath.unitarity_residual(w) > qmath.PSD_TOL:
        raise ValueError('Bob output states are not orthonormal')
    return w


def bob_output(b, outputs=None):
    """Return Bob's post-measurement state |phi_b>."""
    b = check_bit(b, 'b')
    return vector(_outputs(outputs).mat[:, b], BOB)


def optimal_bob_alphas(q0, q1, s):
    """Return Bob's optimal conclusive weights (alpha0, alpha1).

    Raises:
        ValidityError: Unless s < sqrt(q1/q0) and s < sqrt(q0/q1).

    """
    q0, q1 = check_priors(q0, q1)
    s = check_overlap(s)
    if s > 0.0:
        if q0 == 0.0 or q1 == 0.0 or s >= validity_limit(q0, q1):
            raise ValidityError(
                'Overlap {} outside optimal measurement window, clamp s '
                'below {:.6g} or use the measure-one-state optimum'.format(
                    s, validity_limit(q0, q1)))
        return (1.0 - math.sqrt(q1 / q0) * s, 1.0 - math.sqrt(q0 / q1) * s)
    return (1.0, 1.0)


def validity_limit(q0, q1):
    """Return min(sqrt(q1/q0), sqrt(q0/q1))."""
    if q0 == 0.0 or q1 == 0.0:
        return 0.0
    return min(math.sqrt(q1 / q0), math.sqrt(q0 / q1))


def psi_tilde(s, b):
    """Return Eve's conditional state sqrt(1-s^2)|alpha_b> on E."""
    s = check_overlap(s)
    b = check_bit(b, 'b')
    sign = -1.0 if b else 1.0
    return vector([0.0,
                   math.sqrt((1.0 - s) / 2.0),
                   sign * math.sqrt((1.0 + s) / 2.0)], EVE)


def eve_povm(s, u0, u1):
    """Return Eve's POVM {0: M0, 1: M1, '?': M?} on E.

    M_e = u_e|u_e><u_e| with |u_e> orthogonal to |0> and dual to
    the conditional states psi_tilde.

    Raises:
        ConstraintError: If (1-u0)(1-u1) < s^2.

    """
    s = check_overlap(s)
    u0 = check_rate('u0', u0)
    u1 = check_rate('u1', u1)
    if not feasible(s, u0, u1):
        raise ConstraintError(
            'Eve weights infeasible: (1-{})(1-{}) < {}^2'.format(u0, u1, s))
    ret = {}
    for e, w in ((0, u0), (1, u1)):
        sign = -1.0 if e else 1.0
        ue = vector([0.0, 1.0 / math.sqrt(2.0 * (1.0 - s)),
                     sign / math.sqrt(2.0 * (1.0 + s))], EVE)
        ret[e] = w * dm(ue)
    ret[INCONCLUSIVE] = identity(EVE) - ret[0] - ret[1]
    return ret


def tau_state(s, eta_ab, a, b):
    """Return Eve's Type-II conditional state for a conclusive b."""
    eta_ab = check_rate('eta_ab', eta_ab)
    s = check_overlap(s)
    a = check_bit(a)
    b = check_bit(b, 'b')
    pt = dm(psi_tilde(s, b))
    if a != b:
        return pt
    w = (1.0 - eta_ab) / (2.0 * (1.0 - s * s))
    flag = dm(ket(EVE, E='0'))
    return (eta_ab * flag + w * pt) / (eta_ab + w)
