# SPDX-License-Identifier: MIT
"""Joint outcome distributions and the Alice-Bob secret key rate.

Outcome alphabets: Alice a in {0,1}; Bob b and Eve e in {0,1,'?'}.
Tables are built by evolving the analytic model (see eavesdrop) and
then post-processed: Bob and Alice keep only Bob's conclusive rounds,
while Eve discards only her own inconclusive rounds. The key rate is

    K = max{0, H(A) - H(B,A) - H(E) + H(B,E)}

in bits, with H(A) from Alice's priors, H(B,A) from the post-processed
Alice-Bob table and H(E), H(B,E) from the post-processed Bob-Eve table.
"""

import logging
import math
import numpy as np
from scipy.special import entr

from sdqkd import qmath, scenario, eavesdrop
from sdqkd.scenario import BITS, OUTCOMES, STRUCT_TYPE1

_log = logging.getLogger('keyrate')
_log.setLevel(logging.DEBUG)

ALPHABETS = {
    'a': BITS,
    'b': OUTCOMES,
    'e': OUTCOMES,
}


class DegenerateError(ValueError):
    """A distribution has no mass left to normalise."""
    pass


def _label(v):
    return str(v)


class jointdist:
    """Immutable probability table over labelled outcome axes.

    Args:
        axes (sequence): Axis names, each one of 'a', 'b', 'e', or
            (name, alphabet) pairs.
        table (array): Non-negative entries, one dimension per axis.
        normalized (bool): True if the table is a full distribution.

    Raises:
        ValueError: On negative entries or a normalised table whose
            total differs from 1.

    """

    def __init__(self, axes, table, normalized=True):
        names = []
        alphabets = []
        for ax in axes:
            if isinstance(ax, str):
                ax = (ax, ALPHABETS[ax])
            name, alphabet = ax
            if name in names:
                raise ValueError('Duplicate axis: ' + repr(name))
            names.append(name)
            alphabets.append(tuple(alphabet))
        t = np.array(table, dtype=float)
        if t.shape != tuple(len(a) for a in alphabets):
            raise ValueError('Table shape {} does not match axes {!r}'.format(
                t.shape, names))
        if t.size and np.min(t) < -qmath.PSD_TOL:
            raise ValueError('Negative probability {:.3g} in table'.format(
                np.min(t)))
        t = np.clip(t, 0.0, None)
        if normalized and abs(t.sum() - 1.0) > 1e3 * qmath.TOL:
            raise ValueError('Table total {!r} is not 1'.format(t.sum()))
        t.setflags(write=False)
        self.__names = tuple(names)
        self.__alphabets = tuple(alphabets)
        self.__table = t
        self.__normalized = bool(normalized)

    @property
    def names(self):
        return self.__names

    @property
    def table(self):
        return self.__table

    @property
    def normalized(self):
        return self.__normalized

    def alphabet(self, name):
        return self.__alphabets[self._axis(name)]

    def _axis(self, name):
        try:
            return self.__names.index(name)
        except ValueError:
            raise KeyError('No axis {!r} in {!r}'.format(
                name, self.__names)) from None

    def _index(self, outcomes):
        idx = []
        for alphabet, o in zip(self.__alphabets, outcomes):
            if o not in alphabet:
                raise KeyError('Outcome {!r} not in {!r}'.format(o, alphabet))
            idx.append(alphabet.index(o))
        return tuple(idx)

    def __getitem__(self, outcomes):
        if not isinstance(outcomes, tuple):
            outcomes = (outcomes, )
        if len(outcomes) != len(self.__names):
            raise KeyError('Expected {} outcomes, got {!r}'.format(
                len(self.__names), outcomes))
        return float(self.__table[self._index(outcomes)])

    def prob(self, **outcomes):
        """Return the entry named by axis keywords, eg prob(a=0, b='?')."""
        return self[tuple(outcomes[n] for n in self.__names)]

    def total(self):
        return float(self.__table.sum())

    def marginal(self, keep):
        """Sum out every axis not in keep."""
        if isinstance(keep, str):
            keep = (keep, )
        for k in keep:
            self._axis(k)
        drop = tuple(i for i, n in enumerate(self.__names) if n not in keep)
        t = self.__table.sum(axis=drop) if drop else self.__table
        axes = [(n, a) for n, a in zip(self.__names, self.__alphabets)
                if n in keep]
        return jointdist(axes, t, self.__normalized)

    def restrict(self, name, outcomes):
        """Return the sub-normalised table with axis name limited."""
        i = self._axis(name)
        alphabet = self.__alphabets[i]
        sel = [alphabet.index(o) for o in outcomes]
        t = np.take(self.__table, sel, axis=i)
        axes = list(zip(self.__names, self.__alphabets))
        axes[i] = (name, tuple(outcomes))
        return jointdist(axes, t, normalized=False)

    def normalize(self):
        """Return the table scaled to unit total.

        Raises:
            DegenerateError: If the table has no mass.

        """
        tot = self.total()
        if tot <= qmath.TOL * qmath.TOL:
            raise DegenerateError('No mass to normalise over {!r}'.format(
                self.__names))
        return jointdist(zip(self.__names, self.__alphabets),
                         self.__table / tot)

    def max_abs_diff(self, other):
        if self.__names != other.names or self.__table.shape != other.table.shape:
            raise ValueError('Tables are not comparable')
        return float(np.max(np.abs(self.__table - other.table)))

    def rows(self):
        """Yield (outcomes, probability) in table order."""
        for idx in np.ndindex(*self.__table.shape):
            yield (tuple(a[i] for a, i in zip(self.__alphabets, idx)),
                   float(self.__table[idx]))

    def as_dict(self):
        """Return a JSON-friendly mapping of 'a=0,b=?' style keys."""
        ret = {}
        for outcomes, v in self.rows():
            ret[','.join('{}={}'.format(n, _label(o))
                         for n, o in zip(self.__names, outcomes))] = v
        return ret

    def __repr__(self):
        return 'jointdist({!r}, total={:.12g})'.format(self.__names,
                                                       self.total())


def entropy(d):
    """Return the Shannon entropy of a normalised table in bits."""
    if not d.normalized:
        raise ValueError('Entropy of sub-normalised table')
    return float(np.sum(entr(d.table)) / math.log(2.0))


def mutual_information(d, x, y):
    """Return I(x:y) in bits from the normalised table d."""
    return (entropy(d.marginal(x)) + entropy(d.marginal(y)) -
            entropy(d.marginal((x, y))))


def joint_ab(p):
    """Return the Alice-Bob table for params p.

    P(a,b) = q_a (eta alpha_b delta_ab + (1-eta) alpha_b / (2(1-s^2)))
    for conclusive b, and the remainder of q_a for b='?'.
    """
    w = (1.0 - p.eta_ab) / (2.0 * (1.0 - p.s * p.s))
    t = np.zeros((2, 3))
    for a in BITS:
        for b in BITS:
            t[a, b] = p.prior(a) * p.alpha(b) * (p.eta_ab *
                                                 (a == b) + w)
        t[a, 2] = p.prior(a) - t[a, 0] - t[a, 1]
    return jointdist(('a', 'b'), t)


def joint_abe(p, structure=STRUCT_TYPE1, outputs=None):
    """Return the Alice-Bob-Eve table by explicit state evolution."""
    povm = scenario.eve_povm(p.s, p.u0, p.u1)
    t = np.zeros((2, 3, 3))
    for a in BITS:
        cond = eavesdrop.conditional_states(p, a, structure, outputs)
        for bi, b in enumerate(OUTCOMES):
            prob, state = cond[b]
            if state is None:
                continue
            for ei, e in enumerate(OUTCOMES):
                t[a, bi, ei] = p.prior(a) * prob * eavesdrop.eve_outcome_prob(
                    state, povm[e])
    return jointdist(('a', 'b', 'e'), t)


def joint_be(p, structure=STRUCT_TYPE1, outputs=None):
    """Return the Bob-Eve table as the Alice marginal of joint_abe."""
    return joint_abe(p, structure, outputs).marginal(('b', 'e'))


def joint_ab_equal(s, eta_ab):
    """Return the equal-prior Alice-Bob table for optimal Bob weights."""
    s = scenario.check_overlap(s)
    eta_ab = scenario.check_rate('eta_ab', eta_ab)
    right = 0.5 * (eta_ab * (1.0 - s) + (1.0 - eta_ab) / (2.0 * (1.0 + s)))
    wrong = (1.0 - eta_ab) / (4.0 * (1.0 + s))
    t = np.array([[right, wrong, 0.5 - right - wrong],
                  [wrong, right, 0.5 - right - wrong]])
    return jointdist(('a', 'b'), t)


def joint_be_equal(s, eta_ab):
    """Return the equal-prior Bob-Eve table for optimal weights.

    Eve-conclusive entries are (1-eta)(1-s)/(2(1+s)) on the diagonal,
    zero off it, and (1-eta)s/(2(1+s)) when Bob is inconclusive. The
    (b,'?') entries follow from Bob's marginal and ('?','?') from
    normalisation.
    """
    s = scenario.check_overlap(s)
    eta_ab = scenario.check_rate('eta_ab', eta_ab)
    match = (1.0 - eta_ab) * (1.0 - s) / (2.0 * (1.0 + s))
    blind = (1.0 - eta_ab) * s / (2.0 * (1.0 + s))
    bob = 0.5 * (1.0 - s) * (eta_ab + (1.0 - eta_ab) / (1.0 - s * s))
    t = np.zeros((3, 3))
    t[0, 0] = t[1, 1] = match
    t[0, 2] = t[1, 2] = bob - match
    t[2, 0] = t[2, 1] = blind
    t[2, 2] = 1.0 - t.sum()
    return jointdist(('b', 'e'), t)


def postprocess_ab(d):
    """Drop Bob's inconclusive rounds and renormalise.

    Raises:
        DegenerateError: If Bob has no conclusive mass.

    """
    return d.restrict('b', BITS).normalize()


def postprocess_be(d):
    """Drop Eve's inconclusive rounds and renormalise.

    Bob's inconclusive rounds are kept, Eve cannot tell them apart.

    Raises:
        DegenerateError: If Eve has no conclusive mass.

    """
    return d.restrict('e', BITS).normalize()


def success_prob_from_joint(d):
    """Return sum_b P(b, e=b) over conclusive b."""
    return sum(d.prob(b=b, e=b) for b in BITS)


def key_terms(priors, ab, be, postselect_alice=False):
    """Return the entropy terms and key rate from processed tables.

    Args:
        priors (sequence): Alice's priors (q0, q1).
        ab (jointdist): Post-processed Alice-Bob table.
        be (jointdist): Post-processed Bob-Eve table.
        postselect_alice (bool): Take H(A) from ab instead of priors.

    Returns:
        dict: h_a, h_ab, h_e, h_be, i_ab, i_be and k.

    """
    if postselect_alice:
        h_a = entropy(ab.marginal('a'))
    else:
        h_a = entropy(jointdist(('a', ), priors))
    h_ab = entropy(ab)
    h_e = entropy(be.marginal('e'))
    h_be = entropy(be)
    raw = h_a - h_ab - h_e + h_be
    return {
        'h_a': h_a,
        'h_ab': h_ab,
        'h_e': h_e,
        'h_be': h_be,
        'i_ab': mutual_information(ab, 'a', 'b'),
        'i_be': mutual_information(be, 'b', 'e'),
        'k_raw': raw,
        'k': max(0.0, raw),
    }


def _eve_table(p, structure, outputs, d):
    if p.eta_ab < 1.0:
        return d.marginal(('b', 'e'))
    # every Eve-conclusive entry carries 1-eta, use the eta -> 1 limit
    _log.debug('Eve table at eta_ab=1 taken from its eta_ab -> 1 limit')
    return joint_be(p.replace(eta_ab=0.0), structure, outputs)


def tables(p, structure=STRUCT_TYPE1, outputs=None):
    """Return (joint_abe, post-processed AB, post-processed BE)."""
    d = joint_abe(p, structure, outputs)
    ab = postprocess_ab(d.marginal(('a', 'b')))
    be = postprocess_be(_eve_table(p, structure, outputs, d))
    return d, ab, be


def secret_key_rate(p, structure=STRUCT_TYPE1, postselect_alice=False,
                    outputs=None):
    """Return the secret key rate K in bits for params p.

    Raises:
        DegenerateError: If Bob or Eve never obtain a conclusive result.

    """
    d, ab, be = tables(p, structure, outputs)
    return key_terms((p.q0, p.q1), ab, be, postselect_alice)['k']


def report(p, postselect_alice=False):
    """Return a record of every intermediate quantity at params p."""
    ret = {'params': p.as_dict(), 'structures': {}}
    results = {}
    for structure in scenario.STRUCTURES:
        d, ab, be = tables(p, structure)
        terms = key_terms((p.q0, p.q1), ab, be, postselect_alice)
        results[structure] = (d, ab, be, terms)
        ret['structures'][structure] = {
            'p_abe': d.as_dict(),
            'p_ab': d.marginal(('a', 'b')).as_dict(),
            'p_be': d.marginal(('b', 'e')).as_dict(),
            'p_ab_post': ab.as_dict(),
            'p_be_post': be.as_dict(),
            'entropy': terms,
            'p_s': success_prob_from_joint(d.marginal(('b', 'e'))),
            'k': terms['k'],
        }
    t1 = results[scenario.STRUCT_TYPE1]
    t2 = results[scenario.STRUCT_TYPE2]
    diff = max(t1[0].max_abs_diff(t2[0]), t1[1].max_abs_diff(t2[1]),
               t1[2].max_abs_diff(t2[2]), abs(t1[3]['k'] - t2[3]['k']))
    ret['structure_max_abs_diff'] = diff
    ret['p_s_closed_form'] = eavesdrop.success_prob_closed_form(p)
    ret['p_s'] = ret['structures'][scenario.STRUCT_TYPE1]['p_s']
    ret['k'] = ret['structures'][scenario.STRUCT_TYPE1]['k']
    return ret
