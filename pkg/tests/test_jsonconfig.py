# SPDX-License-Identifier: MIT

import json
import os
import numpy as np
from pytest import raises

import sdqkd
from sdqkd import jsonconfig, qmath

_SCHEMA = {
    'xtype': {
        'prompt': 'Example',
        'control': 'section',
    },
    'steps': {
        'type': 'int',
        'default': 5,
    },
    'rate': {
        'type': 'float',
        'default': 0.5,
    },
    'kind': {
        'type': 'choice',
        'options': {
            'white': 'White',
            'colored': 'Colored',
        },
        'default': 'white',
    },
    'label': {
        'type': 'str',
        'default': '',
    },
}


def _config():
    cfg = jsonconfig.config()
    cfg.add_section('x', _SCHEMA)
    return cfg


def test_schema_defaults():
    cfg = _config()
    assert cfg.get_value('x', 'steps') == 5
    assert cfg.get_value('x', 'rate') == 0.5
    assert cfg.get_value('x', 'kind') == 'white'
    assert cfg.export_dict('x') == {
        'steps': 5,
        'rate': 0.5,
        'kind': 'white',
        'label': '',
    }


def test_typed_values():
    cfg = _config()
    cfg.set('x', 'steps', '7')
    cfg.set('x', 'rate', '0.25')
    cfg.set('x', 'kind', ' Colored ')
    assert cfg.get_value('x', 'steps') == 7
    assert cfg.get_value('x', 'rate') == 0.25
    assert cfg.get_value('x', 'kind') == 'colored'
    cfg.set('x', 'kind', 'pink')
    assert cfg.get_value('x', 'kind') == 'white'


def test_check_section():
    cfg = _config()
    cfg.set('x', 'steps', 'many')
    cfg.set('x', 'rate', 'fast')
    cfg.set('x', 'kind', 'pink')
    cfg.set('x', 'other', 1)
    problems = cfg.check_section('x')
    assert len(problems) == 4
    assert 'unknown key x:other' in problems
    assert _config().check_section('x') == []


def test_import_csv_text():
    cfg = _config()
    cfg.import_csv_text('# comment\nrate,0.1\nsection,x\nsteps,3\n'
                        'section,y\nfoo,bar\n')
    assert cfg.get_value('x', 'steps') == 3
    assert cfg.get_value('x', 'rate') == 0.5
    assert cfg.get('y', 'foo') == 'bar'
    assert sorted(cfg.sections()) == ['x', 'y']


def test_import_csv_file(tmp_path):
    path = tmp_path / 'recipe.csv'
    path.write_text('section,x\nkind,colored\n')
    cfg = _config()
    cfg.import_csv(str(path))
    assert cfg.get_value('x', 'kind') == 'colored'


def test_numpy_values_serialise():
    rec = {
        'rate': np.float64(0.125),
        'steps': np.int64(4),
        'ok': np.bool_(True),
        'v': np.array([1.0, 2.0]),
    }
    out = json.loads(json.dumps(rec, cls=jsonconfig.encoder))
    assert out == {'rate': 0.125, 'steps': 4, 'ok': True, 'v': [1.0, 2.0]}


def test_merge_and_read():
    a = _config()
    b = jsonconfig.config()
    b.addconf({'x': {'steps': 9}, 'z': {'k': 1}})
    a.merge(b)
    assert a.get_value('x', 'steps') == 9
    assert not a.has_section('z')
    a.merge(b, 'z')
    assert a.get('z', 'k') == 1
    with raises(TypeError):
        a.merge({'x': {}})
    with raises(TypeError):
        b.addconf([1, 2])


def test_savefile_replaces_on_success(tmp_path):
    dest = tmp_path / 'out.txt'
    dest.write_text('old')
    with sdqkd.savefile(str(dest)) as f:
        f.write('new')
    assert dest.read_text() == 'new'
    assert os.listdir(tmp_path) == ['out.txt']


def test_savefile_keeps_old_on_error(tmp_path):
    dest = tmp_path / 'out.txt'
    dest.write_text('old')
    with raises(RuntimeError):
        with sdqkd.savefile(str(dest)) as f:
            f.write('partial')
            raise RuntimeError('interrupted')
    assert dest.read_text() == 'old'
    assert os.listdir(tmp_path) == ['out.txt']


def test_resource_text():
    text = sdqkd.resource_text('fig3.csv')
    assert 'section,scenario' in text
    with raises(FileNotFoundError):
        sdqkd.resource_text('nothere.csv')
    with raises(FileNotFoundError):
        sdqkd.resource_text('..')


def test_init_sets_tolerance(workdir):
    (workdir / sdqkd.SYSCONF).write_text(
        '{"qmath": {"tol": 1e-11, "psdtol": 1e-9}}')
    try:
        sdqkd.init()
        assert qmath.TOL == 1e-11
        assert qmath.PSD_TOL == 1e-9
    finally:
        qmath.set_tolerance(1e-12, 1e-10)
        sdqkd.sysconf.set('qmath', 'tol', 1e-12)
        sdqkd.sysconf.set('qmath', 'psdtol', 1e-10)


def test_default_file_lookup(workdir, tmp_path_factory, monkeypatch):
    defaults = tmp_path_factory.mktemp('defaults')
    monkeypatch.setattr(sdqkd, 'DEFAULTS_PATH', str(defaults))
    assert sdqkd.default_file('..') is None
    assert sdqkd.default_file('a/b/recipe.csv') == 'recipe.csv'
    (defaults / 'recipe.csv').write_text('section,sweep\n')
    assert sdqkd.default_file('recipe.csv') == str(defaults / 'recipe.csv')
    (workdir / 'recipe.csv').write_text('section,sweep\n')
    assert sdqkd.default_file('recipe.csv') == 'recipe.csv'
