# SPDX-License-Identifier: MIT
"""Imperfect linear-optical implementation of the protocol.

Single photons travel on 3-level legs {vac, h, v}: the vacuum level
records a lost photon. Bob and Eve each run a Sagnac-like
interferometer on leg and path, keep the conclusive path, apply a
Hadamard half wave plate and split polarisation onto two photon
number ports (truncated at one photon) watched by on/off detectors.

Detector outcomes: bit 0 when port 0 alone clicks, bit 1 when port 1
alone clicks, inconclusive otherwise and on the inconclusive path.
Bob's no-click rounds on the conclusive path are also reported as
unregistered, see noisy_secret_key_rate().
"""

import logging
import math
import numpy as np

from sdqkd import qmath, scenario, keyrate
from sdqkd.qmath import (space, qop, ket, bra, dm, identity, tensor, embed,
                         lift, partial_trace)
from sdqkd.scenario import BITS, OUTCOMES, INCONCLUSIVE, ParameterError
from sdqkd.keyrate import jointdist

_log = logging.getLogger('optics')
_log.setLevel(logging.DEBUG)

LEG = ('vac', 'h', 'v')
PORT = ('0', '1')
BOB_LEG = space(('B', LEG))
EVE_LEG = space(('E', LEG))
OPTICAL = BOB_LEG * EVE_LEG
BOB_PATH = space(('PB', ('b0', 'b1')))
EVE_PATH = space(('PE', ('e0', 'e1')))

# half wave plate angle realising the Hadamard
HADAMARD_ANGLE = math.pi / 8.0

# trace leakage allowed through the detection chain
LEAK_TOL = 1e-8

ACCOUNT_DISCARD = 'discard'
ACCOUNT_INCONCLUSIVE = 'inconclusive'
ACCOUNTING = (ACCOUNT_DISCARD, ACCOUNT_INCONCLUSIVE)

# analytic basis names on the optical legs
_IDEAL_MAP = {
    'B': {
        '1': 'h',
        '2': 'v'
    },
    'E': {
        '0': 'vac',
        '1': 'h',
        '2': 'v'
    },
}


class PipelineError(RuntimeError):
    """Probability leaked or went out of range in the detection chain."""
    pass


class noise:
    """Imperfections of the optical implementation.

    Args:
        eta_ent (float): Weight of |phi+> in the entangled resource.
        kind (str): 'white' or 'colored' noise on the resource.
        d0 (float): Amplitude damping rate on the Alice to Bob leg.
        de (float): Amplitude damping rate on both entangled legs.
        eta_det (float): Detector efficiency.
        nu (float): Dark count rate, only 0 is supported.

    Raises:
        ParameterError: Listing every field out of range.

    """

    __slots__ = ('_eta_ent', '_kind', '_d0', '_de', '_eta_det', '_nu')
    FIELDS = ('eta_ent', 'kind', 'd0', 'de', 'eta_det', 'nu')

    def __init__(self,
                 eta_ent=1.0,
                 kind=scenario.NOISE_WHITE,
                 d0=0.0,
                 de=0.0,
                 eta_det=1.0,
                 nu=0.0):
        bad = []
        for name, v in (('eta_ent', eta_ent), ('d0', d0), ('de', de),
                        ('eta_det', eta_det)):
            if scenario._bad_unit(v):
                bad.append(name)
        if kind not in scenario.NOISE_KINDS:
            bad.append('kind')
        try:
            if float(nu) != 0.0:
                bad.append('nu')
        except (TypeError, ValueError):
            bad.append('nu')
        if bad:
            raise ParameterError(bad, 'dark counts are not modelled'
                                 if bad == ['nu'] else None)
        object.__setattr__(self, '_eta_ent', float(eta_ent))
        object.__setattr__(self, '_kind', kind)
        object.__setattr__(self, '_d0', float(d0))
        object.__setattr__(self, '_de', float(de))
        object.__setattr__(self, '_eta_det', float(eta_det))
        object.__setattr__(self, '_nu', 0.0)

    def __setattr__(self, name, value):
        raise AttributeError('noise params are immutable')

    def __reduce__(self):
        return (noise, tuple(getattr(self, f) for f in self.FIELDS))

    eta_ent = property(lambda self: self._eta_ent)
    kind = property(lambda self: self._kind)
    d0 = property(lambda self: self._d0)
    de = property(lambda self: self._de)
    eta_det = property(lambda self: self._eta_det)
    nu = property(lambda self: self._nu)

    def replace(self, **kw):
        vals = self.as_dict()
        for k in kw:
            if k not in vals:
                raise TypeError('Unknown noise parameter: ' + repr(k))
        vals.update(kw)
        return noise(**vals)

    def as_dict(self):
        return {f: getattr(self, f) for f in self.FIELDS}

    def __eq__(self, other):
        if not isinstance(other, noise):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(tuple(self.as_dict().items()))

    def __repr__(self):
        return 'noise({})'.format(', '.join(
            '{}={!r}'.format(k, v) for k, v in self.as_dict().items()))


IDEAL = noise()


def _leg(tag):
    return space((tag, LEG))


def amplitude_damping(rho, d, leg='B'):
    """Return rho after photon loss at rate d on the named leg.

    Kraus operators diag(1, sqrt(1-d), sqrt(1-d)), sqrt(d)|vac><h|
    and sqrt(d)|vac><v|.
    """
    d = scenario.check_rate('d', d)
    sp = _leg(leg)
    keep = math.sqrt(1.0 - d)
    lose = math.sqrt(d)
    k0 = np.diag([1.0, keep, keep])
    k1 = np.zeros((3, 3))
    k1[0, 1] = lose
    k2 = np.zeros((3, 3))
    k2[0, 2] = lose
    kraus = [embed(qop(k, sp), rho.rows) for k in (k0, k1, k2)]
    return qmath.apply(kraus, rho)


def _phi_plus():
    v = np.zeros(OPTICAL.dim)
    v[OPTICAL.offset(B='h', E='h')] = 1.0
    v[OPTICAL.offset(B='v', E='v')] = 1.0
    return qmath.vector(v / math.sqrt(2.0), OPTICAL)


def noisy_entangled(eta_ent, kind=scenario.NOISE_WHITE):
    """Return the noisy entangled resource shared by Bob's and Eve's legs.

    white: eta|phi+><phi+| + (1-eta) I/4 on the polarisation span.
    colored: eta|phi+><phi+| + (1-eta)(|hh><hh| + |vv><vv|)/2.
    """
    eta_ent = scenario.check_rate('eta_ent', eta_ent)
    if kind == scenario.NOISE_WHITE:
        pairs = [(x, y) for x in ('h', 'v') for y in ('h', 'v')]
    elif kind == scenario.NOISE_COLORED:
        pairs = [('h', 'h'), ('v', 'v')]
    else:
        raise ParameterError(['kind'], 'unknown noise ' + repr(kind))
    mix = np.zeros((OPTICAL.dim, OPTICAL.dim))
    for x, y in pairs:
        i = OPTICAL.offset(B=x, E=y)
        mix[i, i] = 1.0 / len(pairs)
    return (eta_ent * dm(_phi_plus()) +
            (1.0 - eta_ent) * qop(mix, OPTICAL))


def _complete(columns, dim, spare=None):
    """Return a real unitary from the fixed columns {index: vector}.

    Free inputs are filled in ascending order by Gram-Schmidt over the
    standard basis, starting with the input's own basis vector. An
    optional unitary spare then mixes the free columns.
    """
    u = np.zeros((dim, dim))
    for j, col in columns.items():
        u[:, j] = col
    free = [j for j in range(dim) if j not in columns]
    placed = list(columns)
    for j in free:
        for k in [j] + list(range(dim)):
            cand = np.zeros(dim)
            cand[k] = 1.0
            for i in placed:
                cand -= np.dot(u[:, i], cand) * u[:, i]
            nv = np.linalg.norm(cand)
            if nv > 1e-9:
                u[:, j] = cand / nv
                placed.append(j)
                break
    if spare is not None:
        spare = np.asarray(spare)
        if spare.shape != (len(free), len(free)):
            raise ValueError('Completion must be {0}x{0}'.format(len(free)))
        u = u.astype(complex)
        u[:, free] = u[:, free] @ spare
    return u


def _sagnac(sp, leg, path, amps, spare):
    """Unitary fixing vacuum and the images given in amps."""
    dim = sp.dim
    cols = {}
    for p in sp.basis(path):
        j = sp.offset(**{leg: 'vac', path: p})
        cols[j] = np.eye(dim)[:, j]
    first = sp.basis(path)[0]
    for pol, image in amps.items():
        v = np.zeros(dim)
        for (opol, opath), amp in image.items():
            v[sp.offset(**{leg: opol, path: opath})] = amp
        cols[sp.offset(**{leg: pol, path: first})] = v
    return qop(_complete(cols, dim, spare), sp)


def sagnac_bob(s, completion=None):
    """Return Bob's interferometer on leg B and path PB.

    |h,b0> -> sqrt((1-s)/(1+s))|h,b0> + sqrt(2s/(1+s))|v,b1>
    |v,b0> -> |v,b0>

    Args:
        s (float): Overlap of Alice's states.
        completion (array, optional): 2x2 unitary mixing the images
            of the unused inputs |h,b1> and |v,b1>.

    """
    s = scenario.check_overlap(s)
    amps = {
        'h': {
            ('h', 'b0'): math.sqrt((1.0 - s) / (1.0 + s)),
            ('v', 'b1'): math.sqrt(2.0 * s / (1.0 + s)),
        },
        'v': {
            ('v', 'b0'): 1.0
        },
    }
    return _sagnac(BOB_LEG * BOB_PATH, 'B', 'PB', amps, completion)


def sagnac_eve(s, completion=None):
    """Return Eve's interferometer on leg E and path PE.

    |h,e0> -> |h,e0>
    |v,e0> -> sqrt(2s/(1+s))|h,e1> + sqrt((1-s)/(1+s))|v,e0>
    """
    s = scenario.check_overlap(s)
    amps = {
        'h': {
            ('h', 'e0'): 1.0
        },
        'v': {
            ('h', 'e1'): math.sqrt(2.0 * s / (1.0 + s)),
            ('v', 'e0'): math.sqrt((1.0 - s) / (1.0 + s)),
        },
    }
    return _sagnac(EVE_LEG * EVE_PATH, 'E', 'PE', amps, completion)


def hwp(gamma, leg='B'):
    """Return a half wave plate at angle gamma on a leg."""
    c = math.cos(2.0 * gamma)
    sn = math.sin(2.0 * gamma)
    return qop([[1.0, 0.0, 0.0], [0.0, c, sn], [0.0, sn, -c]], _leg(leg))


def ports(leg='B'):
    """Return the photon number port space of a leg's splitter."""
    return space((leg + '0', PORT), (leg + '1', PORT))


def pbs(leg='B'):
    """Return the polarising beam splitter isometry leg -> ports.

    |h> -> |1,0>, |v> -> -|0,1>, |vac> -> |0,0>
    """
    out = ports(leg)
    v = np.zeros((out.dim, 3))
    v[out.offset(**{leg + '0': '0', leg + '1': '0'}), 0] = 1.0
    v[out.offset(**{leg + '0': '1', leg + '1': '0'}), 1] = 1.0
    v[out.offset(**{leg + '0': '0', leg + '1': '1'}), 2] = -1.0
    return qop(v, out, _leg(leg))


def onoff_povm(eta_det, port='B0'):
    """Return {'off': Pi_off, 'on': Pi_on} for one port.

    Pi_on = eta|1><1|, Pi_off = |0><0| + (1-eta)|1><1|.
    """
    eta_det = scenario.check_rate('eta_det', eta_det)
    sp = space((port, PORT))
    return {
        'off': qop(np.diag([1.0, 1.0 - eta_det]), sp),
        'on': qop(np.diag([0.0, eta_det]), sp),
    }


def outcome_povm(eta_det, leg='B'):
    """Return the click pattern POVM {0, 1, '?'} on a leg's ports."""
    p0 = onoff_povm(eta_det, leg + '0')
    p1 = onoff_povm(eta_det, leg + '1')
    ret = {
        0: tensor(p0['on'], p1['off']),
        1: tensor(p0['off'], p1['on']),
    }
    ret[INCONCLUSIVE] = identity(ports(leg)) - ret[0] - ret[1]
    return ret


def _ideal_isometry(sp):
    parts = []
    for tag, basis in sp.systems:
        if tag not in _IDEAL_MAP:
            raise qmath.LabelError('No optical leg for subsystem ' +
                                   repr(tag))
        w = np.zeros((3, len(basis)))
        for j, name in enumerate(basis):
            w[LEG.index(_IDEAL_MAP[tag][name]), j] = 1.0
        parts.append(qop(w, _leg(tag), space((tag, basis))))
    return tensor(*parts)


def embed_ideal(op):
    """Map an analytic ket or operator on B and E onto the optical legs.

    Bob's |1>, |2> become |h>, |v>; Eve's flag |0> becomes vacuum.
    """
    w = _ideal_isometry(op.rows)
    if op.isket:
        return w @ op
    if not op.isoper:
        raise qmath.LabelError('Embed of non-square operator: ' + repr(op))
    return w @ op @ w.dag()


def build_zeta(p, n, a):
    """Return the state shared by Bob's and Eve's legs for Alice's bit a.

    eta_ab L_d0(|psi_a><psi_a|) x |vac><vac| + (1-eta_ab) L_de x L_de(rho_ent)
    """
    a = scenario.check_bit(a)
    alice = embed_ideal(dm(scenario.alice_state(p.s, a)))
    alice = amplitude_damping(alice, n.d0, 'B')
    direct = tensor(alice, dm(ket(EVE_LEG, E='vac')))
    ent = noisy_entangled(n.eta_ent, n.kind)
    ent = amplitude_damping(ent, n.de, 'B')
    ent = amplitude_damping(ent, n.de, 'E')
    return p.eta_ab * direct + (1.0 - p.eta_ab) * ent


class chain:
    """Detection chain result for one value of Alice's bit.

    Attributes:
        a (int): Alice's bit.
        bob (dict): b -> P(b|a).
        joint (dict): (b, e) -> P(b, e|a).
        unregistered (dict): e -> P(Bob's conclusive path without a
            single click, e|a). This mass is part of bob['?'].

    """

    __slots__ = ('a', 'bob', 'joint', 'unregistered')

    def __init__(self, a, bob, joint, unregistered):
        self.a = a
        self.bob = bob
        self.joint = joint
        self.unregistered = unregistered

    def unregistered_mass(self):
        return sum(self.unregistered.values())

    def as_dict(self):
        return {
            'a': self.a,
            'bob': {str(b): v for b, v in self.bob.items()},
            'joint': {
                '{},{}'.format(b, e): v
                for (b, e), v in self.joint.items()
            },
            'unregistered': {str(e): v
                             for e, v in self.unregistered.items()},
        }


def _select_path(rho, sp, label):
    """Return <label|rho|label> on the path subsystem of sp."""
    tag = sp.tags[0]
    k = lift(bra(ket(sp, **{tag: label})), rho.rows)
    return k @ rho @ k.dag()


def _prob(v, what):
    if v < -qmath.TOL or v > 1.0 + qmath.TOL:
        raise PipelineError('Probability {!r} out of range in {}'.format(
            v, what))
    return min(max(v, 0.0), 1.0)


def _detect(rho, leg, eta_det):
    """Apply hwp and pbs on leg then split rho by click pattern.

    Returns:
        dict: outcome -> rho contracted with the click POVM on leg's
        ports, over the remaining subsystems.

    """
    h = embed(hwp(HADAMARD_ANGLE, leg), rho.rows)
    rho = h @ rho @ h.dag()
    v = lift(pbs(leg), rho.rows)
    rho = v @ rho @ v.dag()
    rest = tuple(t for t in rho.rows.tags if t not in ports(leg))
    ret = {}
    for o, el in outcome_povm(eta_det, leg).items():
        ret[o] = partial_trace(embed(el, rho.rows) @ rho, keep=rest)
    return ret


def _trace(rho):
    return rho.trace().real


def _eve_detect(rho_e, s, n, completion=None):
    """Return {e: P(e)} for Eve's sub-normalised leg state rho_e."""
    total = _trace(rho_e)
    rho = tensor(rho_e, dm(ket(EVE_PATH, PE='e0')))
    u = embed(sagnac_eve(s, completion), rho.rows)
    rho = u @ rho @ u.dag()
    clicks = _detect(_select_path(rho, EVE_PATH, 'e0'), 'E', n.eta_det)
    ret = {e: _trace(clicks[e]) for e in BITS}
    ret[INCONCLUSIVE] = (_trace(clicks[INCONCLUSIVE]) +
                         _trace(_select_path(rho, EVE_PATH, 'e1')))
    leak = abs(sum(ret.values()) - total)
    if leak > LEAK_TOL:
        raise PipelineError('Eve chain leaked {:.3g}'.format(leak))
    return ret


def detection_chain(p, n, a, completion=None):
    """Run Bob's and then Eve's detection on the state for bit a.

    Args:
        p (params): Scenario, q0 s and eta_ab are used.
        n (noise): Imperfections.
        a (int): Alice's bit.
        completion (array, optional): Alternative 2x2 completion of
            both interferometers.

    Returns:
        chain: Conditional tables given a.

    Raises:
        PipelineError: On trace leakage beyond LEAK_TOL or a
            probability out of range.

    """
    a = scenario.check_bit(a)
    zeta = build_zeta(p, n, a)
    rho = tensor(zeta, dm(ket(BOB_PATH, PB='b0')))
    u = embed(sagnac_bob(p.s, completion), rho.rows)
    rho = u @ rho @ u.dag()
    clicks = _detect(_select_path(rho, BOB_PATH, 'b0'), 'B', n.eta_det)
    lost = partial_trace(_select_path(rho, BOB_PATH, 'b1'), keep='E')

    eve = {b: clicks[b] for b in BITS}
    eve[INCONCLUSIVE] = clicks[INCONCLUSIVE] + lost
    bob = {}
    joint = {}
    for b in OUTCOMES:
        bob[b] = _prob(_trace(eve[b]), 'Bob outcome ' + str(b))
        probs = _eve_detect(eve[b], p.s, n, completion)
        for e in OUTCOMES:
            joint[(b, e)] = _prob(probs[e], 'Eve outcome ' + str(e))
    unreg = _eve_detect(clicks[INCONCLUSIVE], p.s, n, completion)
    unreg = {e: _prob(unreg[e], 'unregistered') for e in OUTCOMES}

    leak = abs(sum(bob.values()) - 1.0)
    for b in OUTCOMES:
        leak = max(leak, abs(sum(joint[(b, e)] for e in OUTCOMES) - bob[b]))
    if leak > LEAK_TOL:
        raise PipelineError('Detection chain leaked {:.3g} for a={}'.format(
            leak, a))
    _log.debug('Chain a=%d s=%g: bob=%r unregistered=%.6g', a, p.s, bob,
               sum(unreg.values()))
    return chain(a, bob, joint, unreg)


def noisy_tables(p, n, completion=None):
    """Return (P_ABE, unregistered P_AE) from the detection chain.

    The unregistered table is sub-normalised and already contained
    in the b='?' slice of P_ABE.
    """
    abe = np.zeros((2, 3, 3))
    ae = np.zeros((2, 3))
    for a in BITS:
        c = detection_chain(p, n, a, completion)
        for bi, b in enumerate(OUTCOMES):
            for ei, e in enumerate(OUTCOMES):
                abe[a, bi, ei] = p.prior(a) * c.joint[(b, e)]
        for ei, e in enumerate(OUTCOMES):
            ae[a, ei] = p.prior(a) * c.unregistered[e]
    return (jointdist(('a', 'b', 'e'), abe),
            jointdist(('a', 'e'), ae, normalized=False))


def noisy_success_prob(p, n, completion=None):
    """Return sum_b P_BE(b, e=b) from the noisy tables."""
    abe, unreg = noisy_tables(p, n, completion)
    return keyrate.success_prob_from_joint(abe.marginal(('b', 'e')))


def _check_accounting(accounting):
    if accounting not in ACCOUNTING:
        raise ParameterError(['accounting'],
                             'unknown accounting ' + repr(accounting))
    return accounting


def eve_table(abe, unreg, accounting=ACCOUNT_DISCARD):
    """Return Bob-Eve table ready for Eve's post-processing.

    With accounting 'discard', Bob's unregistered rounds are removed
    from his inconclusive row. With 'inconclusive' they stay.
    """
    be = np.array(abe.marginal(('b', 'e')).table)
    if _check_accounting(accounting) == ACCOUNT_DISCARD:
        be[OUTCOMES.index(INCONCLUSIVE)] -= unreg.marginal('e').table
    return jointdist(('b', 'e'), be, normalized=False)


def noisy_key_terms(p,
                    n,
                    accounting=ACCOUNT_DISCARD,
                    postselect_alice=False,
                    completion=None):
    """Return the entropy terms and key rate for the noisy tables."""
    abe, unreg = noisy_tables(p, n, completion)
    ab = keyrate.postprocess_ab(abe.marginal(('a', 'b')))
    if p.eta_ab >= 1.0:
        # Eve-conclusive entries all carry 1-eta_ab
        _log.debug('Noisy Eve table at eta_ab=1 from its limit')
        abe, unreg = noisy_tables(p.replace(eta_ab=0.0), n, completion)
    be = keyrate.postprocess_be(eve_table(abe, unreg, accounting))
    return keyrate.key_terms((p.q0, p.q1), ab, be, postselect_alice)


def noisy_secret_key_rate(p,
                          n,
                          accounting=ACCOUNT_DISCARD,
                          postselect_alice=False,
                          completion=None):
    """Return the key rate K from the noisy tables.

    Raises:
        DegenerateError: If Bob or Eve never obtain a conclusive result.
        PipelineError: If the detection chain is inconsistent.

    """
    return noisy_key_terms(p, n, accounting, postselect_alice,
                           completion)['k']
