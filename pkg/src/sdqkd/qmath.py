# SPDX-License-Identifier: MIT
"""Labelled dense operators on small tensor-product Hilbert spaces.

A space is an ordered list of subsystems, each with a tag and a
named basis. A qop is an immutable complex matrix whose rows and
columns carry spaces, so that tensor products concatenate labels
and partial traces remove exactly the named subsystems:

    >>> b = space(('B', ('1', '2')))
    >>> e = space(('E', ('0', '1', '2')))
    >>> rho = tensor(dm(ket(b, B='1')), identity(e) / 3)
    >>> partial_trace(rho, keep=['B']).rows.tags
    ('B',)

Kets are column operators with an empty column space.
"""

import logging
import numpy as np

_log = logging.getLogger('qmath')
_log.setLevel(logging.DEBUG)

# Package wide tolerances, updated by sdqkd.init()
TOL = 1e-12
PSD_TOL = 1e-10

# einsum subscript letters
_LETTERS = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'


class LabelError(ValueError):
    """Operator labels are missing, duplicated or incompatible."""
    pass


def set_tolerance(tol=None, psdtol=None):
    """Update the package wide comparison tolerances."""
    global TOL, PSD_TOL
    if tol is not None:
        if tol <= 0:
            raise ValueError('Invalid tolerance: ' + repr(tol))
        TOL = float(tol)
    if psdtol is not None:
        if psdtol <= 0:
            raise ValueError('Invalid PSD tolerance: ' + repr(psdtol))
        PSD_TOL = float(psdtol)
    _log.debug('Tolerance set to %g, PSD tolerance %g', TOL, PSD_TOL)


class space:
    """Ordered tensor product of tagged subsystems.

    Each subsystem is given as a (tag, basis) pair where basis is a
    sequence of basis state names. The empty space has dimension 1.
    """

    def __init__(self, *systems):
        tags = []
        bases = []
        for tag, basis in systems:
            if not isinstance(tag, str) or not tag:
                raise LabelError('Invalid subsystem tag: ' + repr(tag))
            if tag in tags:
                raise LabelError('Duplicate subsystem tag: ' + repr(tag))
            basis = tuple(str(b) for b in basis)
            if len(basis) < 1 or len(set(basis)) != len(basis):
                raise LabelError('Invalid basis for {}: {!r}'.format(
                    tag, basis))
            tags.append(tag)
            bases.append(basis)
        self.__tags = tuple(tags)
        self.__bases = tuple(bases)

    @property
    def tags(self):
        return self.__tags

    @property
    def dims(self):
        return tuple(len(b) for b in self.__bases)

    @property
    def dim(self):
        return int(np.prod(self.dims, dtype=int))

    @property
    def systems(self):
        return tuple(zip(self.__tags, self.__bases))

    def basis(self, tag):
        """Return the basis names of subsystem tag."""
        return self.__bases[self.index(tag)]

    def index(self, tag):
        """Return the position of subsystem tag."""
        try:
            return self.__tags.index(tag)
        except ValueError:
            raise LabelError('Subsystem {!r} not in {!r}'.format(
                tag, self.__tags)) from None

    def select(self, tags):
        """Return the sub-space with tags, in the order of self."""
        tags = _tagset(tags)
        for t in tags:
            self.index(t)
        return space(*(s for s in self.systems if s[0] in tags))

    def reorder(self, tags):
        """Return the same subsystems in the order given by tags."""
        tags = tuple(tags)
        if sorted(tags) != sorted(self.__tags):
            raise LabelError('Reorder {!r} does not match {!r}'.format(
                tags, self.__tags))
        return space(*(self.systems[self.index(t)] for t in tags))

    def offset(self, **labels):
        """Return the flat index of the product basis state labels."""
        if set(labels) != set(self.__tags):
            raise LabelError('Basis labels {!r} do not match {!r}'.format(
                sorted(labels), self.__tags))
        idx = 0
        for tag, basis in self.systems:
            name = str(labels[tag])
            if name not in basis:
                raise LabelError('Basis state {!r} not in {}: {!r}'.format(
                    name, tag, basis))
            idx = idx * len(basis) + basis.index(name)
        return idx

    def __mul__(self, other):
        if not isinstance(other, space):
            return NotImplemented
        return space(*(self.systems + other.systems))

    def __eq__(self, other):
        if not isinstance(other, space):
            return NotImplemented
        return self.systems == other.systems

    def __hash__(self):
        return hash(self.systems)

    def __len__(self):
        return len(self.__tags)

    def __contains__(self, tag):
        return tag in self.__tags

    def __repr__(self):
        return 'space({})'.format(', '.join(
            '{}[{}]'.format(t, len(b)) for t, b in self.systems))


def _tagset(tags):
    if isinstance(tags, str):
        return (tags, )
    return tuple(tags)


class qop:
    """Immutable labelled complex matrix."""

    __array_ufunc__ = None  # numpy scalars defer to qop arithmetic

    def __init__(self, mat, rows, cols=None):
        if not isinstance(rows, space):
            raise TypeError('Row label must be a space: ' + repr(rows))
        if cols is None:
            cols = rows
        elif not isinstance(cols, space):
            raise TypeError('Column label must be a space: ' + repr(cols))
        m = np.array(mat, dtype=complex)
        if m.ndim == 1:
            m = m.reshape((-1, 1))
        if m.shape != (rows.dim, cols.dim):
            raise LabelError('Matrix shape {} does not match {!r} x {!r}'.format(
                m.shape, rows, cols))
        m.setflags(write=False)
        self.__mat = m
        self.__rows = rows
        self.__cols = cols

    @property
    def mat(self):
        """Read-only complex matrix."""
        return self.__mat

    @property
    def rows(self):
        return self.__rows

    @property
    def cols(self):
        return self.__cols

    @property
    def shape(self):
        return self.__mat.shape

    @property
    def isket(self):
        return len(self.__cols) == 0 and self.__mat.shape[1] == 1

    @property
    def isoper(self):
        return self.__rows == self.__cols

    def dag(self):
        """Return the conjugate transpose."""
        return qop(self.__mat.conj().T, self.__cols, self.__rows)

    def trace(self):
        if not self.isoper:
            raise LabelError('Trace of non-square operator')
        return complex(np.trace(self.__mat))

    def norm(self):
        """Euclidean norm of a ket, Frobenius norm otherwise."""
        return float(np.linalg.norm(self.__mat))

    def entry(self, row, col=None):
        """Return one matrix element by basis labels.

        Args:
            row (dict): Labels of the row basis state.
            col (dict, optional): Labels of the column basis state,
                defaults to row.

        """
        if col is None:
            col = row
        return complex(self.__mat[self.__rows.offset(**row),
                                  self.__cols.offset(**col)])

    def equals(self, other, tol=None):
        """Return True if labels match and entries agree within tol."""
        if tol is None:
            tol = TOL
        if not isinstance(other, qop):
            return False
        if self.__rows != other.rows or self.__cols != other.cols:
            return False
        return bool(np.max(np.abs(self.__mat - other.mat)) <= tol)

    def __matmul__(self, other):
        if not isinstance(other, qop):
            return NotImplemented
        if self.__cols != other.rows:
            raise LabelError('Cannot compose {!r} with {!r}'.format(
                self.__cols, other.rows))
        return qop(self.__mat @ other.mat, self.__rows, other.cols)

    def __add__(self, other):
        if not isinstance(other, qop):
            return NotImplemented
        self._check_like(other)
        return qop(self.__mat + other.mat, self.__rows, self.__cols)

    def __sub__(self, other):
        if not isinstance(other, qop):
            return NotImplemented
        self._check_like(other)
        return qop(self.__mat - other.mat, self.__rows, self.__cols)

    def __mul__(self, scalar):
        if isinstance(scalar, qop):
            return NotImplemented
        return qop(self.__mat * complex(scalar), self.__rows, self.__cols)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return qop(self.__mat / complex(scalar), self.__rows, self.__cols)

    def __neg__(self):
        return qop(-self.__mat, self.__rows, self.__cols)

    def _check_like(self, other):
        if self.__rows != other.rows or self.__cols != other.cols:
            raise LabelError('Label mismatch: {!r} x {!r} and {!r} x {!r}'.format(
                self.__rows, self.__cols, other.rows, other.cols))

    def __repr__(self):
        return 'qop({!r} x {!r})'.format(self.__rows, self.__cols)


EMPTY = space()


def ket(sp, **labels):
    """Return the product basis ket named by labels."""
    v = np.zeros(sp.dim, dtype=complex)
    v[sp.offset(**labels)] = 1.0
    return qop(v, sp, EMPTY)


def vector(amplitudes, sp):
    """Return a ket from an amplitude sequence over sp."""
    return qop(np.asarray(amplitudes, dtype=complex), sp, EMPTY)


def bra(k):
    return k.dag()


def dm(k):
    """Return the projector |k><k| of a ket."""
    if not k.isket:
        raise LabelError('Density of non-ket: ' + repr(k))
    return k @ k.dag()


def identity(sp):
    return qop(np.eye(sp.dim), sp, sp)


def zero(rows, cols=None):
    if cols is None:
        cols = rows
    return qop(np.zeros((rows.dim, cols.dim)), rows, cols)


def tensor(*ops):
    """Return the Kronecker product of ops with concatenated labels."""
    if not ops:
        raise TypeError('tensor requires at least one operator')
    ret = ops[0]
    for op in ops[1:]:
        ret = qop(np.kron(ret.mat, op.mat), ret.rows * op.rows,
                  ret.cols * op.cols)
    return ret


def permute(op, tags):
    """Reorder the subsystems of a square operator or ket."""
    rows = op.rows.reorder(tags)
    order = [op.rows.index(t) for t in rows.tags]
    n = len(order)
    if op.isket:
        t = op.mat.reshape(op.rows.dims).transpose(order)
        return qop(t.reshape(-1), rows, EMPTY)
    if not op.isoper:
        raise LabelError('Permute of non-square operator: ' + repr(op))
    t = op.mat.reshape(op.rows.dims + op.rows.dims)
    t = t.transpose(order + [n + i for i in order])
    return qop(t.reshape((rows.dim, rows.dim)), rows, rows)


def partial_trace(rho, keep):
    """Trace out every subsystem of rho not named in keep.

    The kept subsystems stay in their original order.

    Raises:
        LabelError: If a tag in keep is not a subsystem of rho.

    """
    if rho.isket:
        rho = dm(rho)
    if not rho.isoper:
        raise LabelError('Partial trace of non-square operator: ' + repr(rho))
    sp = rho.rows
    keep = _tagset(keep)
    for t in keep:
        sp.index(t)
    n = len(sp)
    if n == 0:
        return rho
    if 2 * n > len(_LETTERS):
        raise LabelError('Too many subsystems for partial trace: ' + repr(sp))
    ridx = list(_LETTERS[:n])
    cidx = list(_LETTERS[n:2 * n])
    for i, t in enumerate(sp.tags):
        if t not in keep:
            cidx[i] = ridx[i]
    out = [ridx[i] for i, t in enumerate(sp.tags) if t in keep]
    out += [cidx[i] for i, t in enumerate(sp.tags) if t in keep]
    subscripts = ''.join(ridx) + ''.join(cidx) + '->' + ''.join(out)
    t = np.einsum(subscripts, rho.mat.reshape(sp.dims + sp.dims))
    ksp = sp.select(keep)
    return qop(t.reshape((ksp.dim, ksp.dim)), ksp, ksp)


def embed(op, sp):
    """Extend an operator on some subsystems of sp to all of sp.

    Identity is placed on the remaining subsystems.
    """
    if not op.isoper:
        raise LabelError('Embed of non-square operator: ' + repr(op))
    rest = tuple(t for t in sp.tags if t not in op.rows)
    for t in op.rows.tags:
        sp.index(t)
    full = tensor(op, identity(sp.select(rest))) if rest else op
    return permute(full, sp.tags)


def lift(op, sp):
    """Extend a map on some subsystems of sp to all of sp.

    op may change its subsystems, eg an isometry or a bra. The result
    maps sp to the untouched subsystems of sp, in their order,
    followed by the output subsystems of op.
    """
    for t in op.cols.tags:
        sp.index(t)
    rest = sp.select(tuple(t for t in sp.tags if t not in op.cols))
    full = tensor(identity(rest), op)
    order = [full.cols.index(t) for t in sp.tags]
    m = full.mat.reshape((full.rows.dim, ) + full.cols.dims)
    m = m.transpose([0] + [1 + i for i in order])
    return qop(m.reshape((full.rows.dim, sp.dim)), full.rows, sp)


def apply(channel, rho):
    """Return sum_k K rho K^dagger over a Kraus sequence."""
    ret = None
    for k in channel:
        term = k @ rho @ k.dag()
        ret = term if ret is None else ret + term
    return ret


def is_hermitian(m, tol=None):
    if tol is None:
        tol = TOL
    if not m.isoper:
        return False
    return bool(np.max(np.abs(m.mat - m.mat.conj().T)) <= tol)


def eigvalsh(m):
    """Return ascending eigenvalues of the Hermitian part of m."""
    h = 0.5 * (m.mat + m.mat.conj().T)
    return np.linalg.eigvalsh(h)


def is_psd(m, tol=None):
    """Return True if m is Hermitian and has no eigenvalue below -tol."""
    if tol is None:
        tol = PSD_TOL
    if not m.isoper:
        return False
    if not is_hermitian(m, tol):
        return False
    return bool(eigvalsh(m)[0] >= -tol)


def sqrtm_psd(m):
    """Return the PSD square root of a PSD operator.

    Eigenvalues within the PSD tolerance below zero are clipped.
    """
    if not is_psd(m):
        raise ValueError('Square root of non-PSD operator: ' + repr(m))
    h = 0.5 * (m.mat + m.mat.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return qop((v * np.sqrt(w)) @ v.conj().T, m.rows, m.cols)


def completeness_residual(elements, sp):
    """Return max |sum(elements) - I| over sp."""
    total = zero(sp)
    for e in elements:
        total = total + e
    return float(np.max(np.abs(total.mat - np.eye(sp.dim))))


def unitarity_residual(u):
    """Return max |U^dagger U - I| over the domain of u."""
    return float(np.max(np.abs(u.mat.conj().T @ u.mat - np.eye(u.shape[1]))))
