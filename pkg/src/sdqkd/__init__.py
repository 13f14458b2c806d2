# SPDX-License-Identifier: MIT
"""Eavesdropping and key rate toolkit for sequential-discrimination B92 QKD."""

import os
import logging
from importlib.resources import files
from tempfile import NamedTemporaryFile
from shutil import copyfile
from sdqkd import jsonconfig

VERSION = '1.0.0'
APIVERSION = 1
DEFAULTS_PATH = os.environ.get(
    'SDQKD_DEFAULTS',
    os.path.realpath(os.path.expanduser(os.path.join('~', '.config',
                                                     'sdqkd'))))
RESOURCE_PKG = 'sdqkd.data'
SYSCONF = 'sdqkd.json'
LOGFORMAT = '%(levelname)s %(name)s: %(message)s'
LOGLEVEL = logging.WARNING  # console level without --verbose or --debug
sysconf = jsonconfig.config()  # filled in by init()
_log = logging.getLogger('sdqkd')
_log.setLevel(logging.DEBUG)

_CONFIG_SCHEMA = {
    'ttype': {
        'prompt': 'Numerical Tolerances',
        'control': 'section',
    },
    'tol': {
        'prompt': 'Tolerance:',
        'hint': 'Absolute tolerance for algebraic identities',
        'type': 'float',
        'default': 1e-12,
    },
    'psdtol': {
        'prompt': 'PSD Tolerance:',
        'hint': 'Eigenvalue tolerance for Hermitian and PSD checks',
        'type': 'float',
        'default': 1e-10,
    },
}


def init():
    """Load the system configuration and apply package tolerances.

    The packaged defaults are read first, then overlaid with the
    first sdqkd.json found by default_file().
    """
    with files(RESOURCE_PKG).joinpath(SYSCONF).open('rb') as f:
        sysconf.read(f)
    local = default_file(SYSCONF)
    if local is not None and os.path.exists(local):
        if not sysconf.load(local):
            _log.warning('Ignored unreadable system config %r', local)
    else:
        _log.debug('Using packaged system defaults')

    from sdqkd import qmath
    sysconf.add_section('qmath', _CONFIG_SCHEMA)
    qmath.set_tolerance(sysconf.get_value('qmath', 'tol'),
                        sysconf.get_value('qmath', 'psdtol'))


def _basename(name):
    base = os.path.basename(name or '')
    if base in ('', '.', '..'):
        return None
    return base


def default_file(filename):
    """Return a path to filename in the working directory or DEFAULTS_PATH.

    Directory components of filename are ignored. When neither
    location holds the file, the bare name is returned; an empty
    or relative-dot name returns None.
    """
    base = _basename(filename)
    if base is None:
        _log.debug('Invalid filename %r ignored', filename)
        return None
    if not os.path.exists(base):
        alt = os.path.join(DEFAULTS_PATH, base)
        if os.path.exists(alt):
            return alt
    return base


def resource_text(name, encoding='utf-8'):
    """Return the text of a packaged data file, eg a figure recipe.

    Raises:
        FileNotFoundError: If name is not a packaged data file.

    """
    base = _basename(name)
    if base is None:
        raise FileNotFoundError('Invalid resource name: ' + repr(name))
    ref = files(RESOURCE_PKG).joinpath(base)
    if not ref.is_file():
        raise FileNotFoundError('Named resource not found: ' + repr(name))
    return ref.read_text(encoding=encoding)


class savefile:
    """Write a file through a temporary sibling.

    The context yields the open temporary file. A clean exit moves
    it onto filename (copying when rename fails across devices);
    an exception removes it and leaves filename as it was.
    """

    def __init__(self, filename, encoding='utf-8', newline=None, perm=0o644):
        self.__dest = filename
        self.__perm = perm
        self.__tmp = NamedTemporaryFile(
            mode='w',
            suffix='.tmp',
            prefix='sav_',
            dir=os.path.dirname(os.path.abspath(filename)),
            encoding=encoding,
            newline=newline,
            delete=False)

    def __enter__(self):
        return self.__tmp

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.__tmp.close()
        tmpname = self.__tmp.name
        if exc_type is not None:
            os.unlink(tmpname)
            return False
        os.chmod(tmpname, self.__perm)
        try:
            os.replace(tmpname, self.__dest)
        except OSError:
            copyfile(tmpname, self.__dest)
            os.unlink(tmpname)
        return True
