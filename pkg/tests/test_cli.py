# SPDX-License-Identifier: MIT

import csv
import io
import json
from functools import partial
import numpy as np
from pytest import approx, mark

import sdqkd
from sdqkd import cli, qmath, scenario


def _table(path):
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def _run(workdir, *argv, name='out.csv'):
    out = workdir / name
    ret = cli.main(list(argv) + ['--out', str(out)])
    return ret, out


def test_no_command(workdir):
    assert cli.main([]) == cli.EXIT_INVALID


def test_bad_flag_value(workdir):
    assert cli.main(['fig3', '--steps', 'x']) == cli.EXIT_INVALID
    assert cli.main(['fig3', '--s', 'half']) == cli.EXIT_INVALID
    assert cli.main(['fig3', '--noise', 'pink']) == cli.EXIT_INVALID


def test_point_record(workdir):
    ret, out = _run(workdir, 'point', '--q0', '0.5', '--s', '0.5',
                    '--eta-ab', '0.5', name='point.json')
    assert ret == cli.EXIT_OK
    rec = json.loads(out.read_text())
    assert rec['api'] == 'sdqkd.point'
    assert rec['apiversion'] == 1
    assert rec['p_s'] == approx(1.0 / 6.0, abs=1e-12)
    assert rec['p_s_optimal'] == approx(1.0 / 6.0, abs=1e-12)
    assert rec['structure_max_abs_diff'] < 1e-12
    assert rec['branch']['branch'] == 'interior'
    assert set(rec['structures']) == {'type1', 'type2'}


def test_point_without_loss(workdir):
    ret, out = _run(workdir, 'point', '--s', '0.5', '--eta-ab', '1',
                    name='point.json')
    assert ret == cli.EXIT_OK
    rec = json.loads(out.read_text())
    assert rec['p_s'] == approx(0.0, abs=1e-15)
    assert rec['k'] == approx(1.0, abs=1e-9)


def test_point_invalid(workdir):
    assert cli.main(['point', '--q0', '1.5', '--s', '1.2']) == cli.EXIT_INVALID
    # outside the optimal measurement window for q0 = 0.4
    assert cli.main(['point', '--q0', '0.4', '--s',
                     '0.9']) == cli.EXIT_INVALID


def test_point_unwritable(workdir):
    out = workdir / 'missing' / 'point.json'
    assert cli.main(['point', '--out', str(out)]) == cli.EXIT_IO


def test_fig3_table(workdir):
    ret, out = _run(workdir, 'fig3')
    assert ret == cli.EXIT_OK
    header, rows = _table(out)
    assert header == [
        's', 'f0', 'f1', 'p_opt_interior', 'p_opt_boundary', 'p_opt',
        'branch'
    ]
    assert len(rows) == 81
    assert rows[0][0] == '0'
    assert float(rows[0][5]) == approx(0.5)
    first = next(r for r in rows if r[6] == 'boundary')
    assert 0.65 < float(first[0]) <= 0.66
    assert all(r[6] == 'interior' for r in rows if float(r[0]) < 0.65)


def test_fig3_deterministic(workdir):
    ret, a = _run(workdir, 'fig3', '--steps', '11', name='a.csv')
    assert ret == cli.EXIT_OK
    ret, b = _run(workdir, 'fig3', '--steps', '11', name='b.csv')
    assert ret == cli.EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert b'\r\n' not in a.read_bytes()


def test_fig3_audit(workdir):
    ret, out = _run(workdir, 'fig3', '--audit', '--stop', '0.7', '--steps',
                    '5')
    assert ret == cli.EXIT_OK
    header, rows = _table(out)
    assert header[-2:] == ['p_brute', 'p_audit']
    for r in rows:
        assert float(r[7]) == approx(float(r[5]), abs=1e-4)
        assert float(r[8]) <= float(r[5]) + 1e-9
        assert float(r[8]) == approx(float(r[5]), abs=1e-4)


def test_fig3_json(workdir):
    ret, out = _run(workdir, 'fig3', '--steps', '3', '--format', 'json',
                    name='fig3.json')
    assert ret == cli.EXIT_OK
    rec = json.loads(out.read_text())
    assert rec['api'] == 'sdqkd.fig3'
    assert rec['columns'][0] == 's'
    assert len(rec['rows']) == 3
    assert rec['config']['scenario']['q0'] == 0.4


def test_config_recipe(workdir):
    recipe = workdir / 'recipe.csv'
    recipe.write_text('# short sweep\nsection,sweep\nsteps,3\n')
    ret, out = _run(workdir, 'fig3', '--config', str(recipe))
    assert ret == cli.EXIT_OK
    assert len(_table(out)[1]) == 3
    ret, out = _run(workdir, 'fig3', '--config', str(recipe), '--steps', '4')
    assert ret == cli.EXIT_OK
    assert len(_table(out)[1]) == 4


@mark.parametrize('text', [
    'section,sweep\nbogus,1\n',
    'section,extra\nkey,1\n',
    'section,sweep\nsteps,many\n',
    'section,sweep\nstructure,type9\n',
])
def test_config_rejected(workdir, text):
    recipe = workdir / 'recipe.csv'
    recipe.write_text(text)
    assert cli.main(['fig3', '--config', str(recipe)]) == cli.EXIT_INVALID


def test_config_missing_file(workdir):
    assert cli.main(['fig3', '--config',
                     str(workdir / 'nothere.csv')]) == cli.EXIT_IO


def test_bad_grid(workdir):
    assert cli.main(['fig3', '--steps', '1']) == cli.EXIT_INVALID
    assert cli.main(['fig3', '--start', '0.5', '--stop',
                     '0.1']) == cli.EXIT_INVALID


def test_fig5_peak(workdir):
    ret, out = _run(workdir, 'fig5', '--eta-ab', '0.9', '--start', '0.3',
                    '--stop', '0.6', '--steps', '61')
    assert ret == cli.EXIT_OK
    header, rows = _table(out)
    assert header == ['eta_ab', 's', 'k']
    best = max(rows, key=lambda r: float(r[2]))
    assert float(best[1]) == approx(0.4585, abs=0.01)


def test_fig5_series(workdir):
    ret, out = _run(workdir, 'fig5', '--start', '0.1', '--stop', '0.5',
                    '--steps', '3', '--structure', 'type2')
    assert ret == cli.EXIT_OK
    rows = _table(out)[1]
    assert len(rows) == 12
    assert [r[0] for r in rows[::3]] == ['0.9', '0.8', '0.7', '0.6']


def test_fig5_parallel_matches_serial(workdir):
    argv = ['fig5', '--start', '0.2', '--stop', '0.6', '--steps', '5']
    ret, serial = _run(workdir, *argv, name='serial.csv')
    assert ret == cli.EXIT_OK
    ret, pooled = _run(workdir, *argv, '--parallel', '2', name='pooled.csv')
    assert ret == cli.EXIT_OK
    assert serial.read_bytes() == pooled.read_bytes()


def test_fig7_panels(workdir):
    ret, out = _run(workdir, 'fig7', '--steps', '2', '--noise', 'white')
    assert ret == cli.EXIT_OK
    header, rows = _table(out)
    assert header == ['s', 'p_s', 'k', 'kind', 'd0', 'de', 'panel']
    assert len(rows) == 10
    assert {r[6] for r in rows} == {'a', 'b'}
    assert all(r[5] == '0.4' for r in rows if r[6] == 'b')
    assert all(r[3] == 'white' for r in rows)


def test_fig7_custom(workdir):
    ret, out = _run(workdir, 'fig7', '--steps', '2', '--noise', 'colored',
                    '--d0', '0.1', '--de', '0.2')
    assert ret == cli.EXIT_OK
    rows = _table(out)[1]
    assert len(rows) == 2
    assert rows[0][3:] == ['colored', '0.1', '0.2', 'custom']


def test_sweep_damping(workdir):
    argv = ['sweep', '--var', 'd', '--start', '0', '--stop', '0.5', '--steps',
            '3', '--eta-ent', '0.5', '--eta-det', '0.8']
    assert cli.main(argv) == cli.EXIT_INVALID
    ret, out = _run(workdir, *argv, '--model', 'optics')
    assert ret == cli.EXIT_OK
    header, rows = _table(out)
    assert header == ['d', 'p_s', 'k']
    p_s = [float(r[1]) for r in rows]
    assert p_s[0] > p_s[1] > p_s[2]


def test_sweep_efficiency(workdir):
    ret, out = _run(workdir, 'sweep', '--var', 'eta_ab', '--start', '0',
                    '--stop', '1', '--steps', '3', '--s', '0.5')
    assert ret == cli.EXIT_OK
    rows = _table(out)[1]
    assert float(rows[1][1]) == approx(1.0 / 6.0)
    assert float(rows[2][1]) == approx(0.0, abs=1e-12)
    assert float(rows[2][2]) == approx(1.0, abs=1e-9)


def test_selfcheck(workdir):
    ret, out = _run(workdir, 'selfcheck', name='check.txt')
    assert ret == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[-1] == '{} passed, 0 failed'.format(len(cli.SELFCHECKS))
    assert all(line.startswith('PASS') for line in lines[:-1])


def test_selfcheck_injected_fault(workdir, monkeypatch):
    monkeypatch.setattr(cli, 'SELFCHECKS', ())
    ret, out = _run(workdir, 'selfcheck', '--inject-fault', name='check.txt')
    assert ret == cli.EXIT_NUMERIC
    lines = out.read_text().splitlines()
    assert lines[0].startswith('FAIL injected fault')
    assert lines[-1] == '0 passed, 1 failed'


def test_write_table_digits(tmp_path):
    out = tmp_path / 't.csv'
    with open(out, 'w', newline='') as f:
        cli.write_table(f, ['x', 'y'], [[1.0 / 3.0, 'z']], digits=4)
    assert out.read_text() == 'x,y\n0.3333,z\n'


@mark.parametrize('name,check', cli.SELFCHECKS,
                  ids=[name for name, _ in cli.SELFCHECKS])
def test_selfcheck_entry(name, check):
    ok, detail = check(np.random.default_rng(cli.SELFCHECK_SEED))
    assert ok, detail


def test_write_record_numpy_values():
    buf = io.StringIO()
    cli.write_record(buf, {'steps': np.int64(3), 'p_s': np.float64(0.25)})
    assert json.loads(buf.getvalue()) == {'steps': 3, 'p_s': 0.25}


def test_pool_workers_load_system_config(workdir):
    (workdir / sdqkd.SYSCONF).write_text(
        '{"qmath": {"tol": 1e-11, "psdtol": 1e-10}}')
    qmath.set_tolerance(1e-12, 1e-10)
    # 5e-12 short of the constraint: feasible only under the local tolerance
    check = partial(scenario.feasible, 0.5, 0.0)
    w1 = 0.75 + 5e-12
    assert cli._pmap(check, [w1], None) == [False]
    assert cli._pmap(check, [w1, w1], 2) == [True, True]
