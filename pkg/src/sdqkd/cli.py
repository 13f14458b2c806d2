# SPDX-License-Identifier: MIT
"""Command line sweeps, point records and self checks.

Subcommands:

  fig3       Eve's optimal success probability and branch against s
  fig5       key rate against s for several channel efficiencies
  fig7       noisy success probability and key rate of the optics model
  point      JSON record of every intermediate quantity at one point
  sweep      sweep one of s, eta_ab or d with either model
  selfcheck  run the invariant suite

Settings come from the packaged recipe of each figure, then an
optional --config recipe file, then command line flags. Exit status
is 0 on success, 1 for invalid input, 2 for a numerical failure and
3 for an I/O error.
"""

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import sdqkd
from sdqkd import jsonconfig, qmath, scenario, eavesdrop, keyrate, optics

_log = logging.getLogger('cli')
_log.setLevel(logging.DEBUG)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

SWEEP_VARS = ('s', 'eta_ab', 'd')
FORMATS = ('csv', 'json')
MODEL_ANALYTIC = 'analytic'
MODEL_OPTICS = 'optics'
MODELS = (MODEL_ANALYTIC, MODEL_OPTICS)

# random parameter draws for the self check
SELFCHECK_DRAWS = 100
SELFCHECK_SEED = 20240917

_SCENARIO_SCHEMA = {
    'stype': {
        'prompt': 'Scenario',
        'control': 'section',
    },
    'q0': {
        'prompt': 'Prior q0:',
        'hint': 'Probability of Alice sending bit 0',
        'type': 'float',
        'default': 0.5,
    },
    's': {
        'prompt': 'Overlap:',
        'hint': 'Overlap of Alice\'s states, in [0,1)',
        'type': 'float',
        'default': 0.5,
    },
    'eta_ab': {
        'prompt': 'Channel efficiency:',
        'hint': 'Probability the signal reaches Bob unattacked',
        'type': 'float',
        'default': 0.5,
    },
}

_NOISE_SCHEMA = {
    'ntype': {
        'prompt': 'Optical Imperfections',
        'control': 'section',
    },
    'eta_ent': {
        'prompt': 'Entanglement weight:',
        'type': 'float',
        'default': 1.0,
    },
    'noise': {
        'prompt': 'Noise:',
        'type': 'choice',
        'options': {
            'white': 'White noise',
            'colored': 'Colored noise',
        },
        'default': 'white',
    },
    'eta_det': {
        'prompt': 'Detector efficiency:',
        'type': 'float',
        'default': 1.0,
    },
    'd0': {
        'prompt': 'Damping Alice-Bob:',
        'type': 'float',
        'default': 0.0,
    },
    'de': {
        'prompt': 'Damping entangled:',
        'type': 'float',
        'default': 0.0,
    },
}

_SWEEP_SCHEMA = {
    'wtype': {
        'prompt': 'Sweep',
        'control': 'section',
    },
    'var': {
        'prompt': 'Variable:',
        'type': 'choice',
        'options': {
            's': 'Overlap',
            'eta_ab': 'Channel efficiency',
            'd': 'Damping, d0 = de',
        },
        'default': 's',
    },
    'start': {
        'prompt': 'Start:',
        'type': 'float',
        'default': 0.0,
    },
    'stop': {
        'prompt': 'Stop:',
        'type': 'float',
        'default': 0.9,
    },
    'steps': {
        'prompt': 'Steps:',
        'type': 'int',
        'default': 19,
    },
    'structure': {
        'prompt': 'Structure:',
        'type': 'choice',
        'options': {
            'type1': 'Entangling machine',
            'type2': 'Intercept with shared pair',
        },
        'default': 'type1',
    },
    'format': {
        'prompt': 'Format:',
        'type': 'choice',
        'options': {
            'csv': 'CSV table',
            'json': 'JSON record',
        },
        'default': 'csv',
    },
    'accounting': {
        'prompt': 'Unregistered rounds:',
        'type': 'choice',
        'options': {
            'discard': 'Removed before Eve post-processing',
            'inconclusive': 'Kept as inconclusive',
        },
        'default': 'discard',
    },
    'model': {
        'prompt': 'Model:',
        'type': 'choice',
        'options': {
            'analytic': 'Analytic model',
            'optics': 'Optical implementation',
        },
        'default': 'analytic',
    },
    'series': {
        'prompt': 'Series:',
        'hint': 'Space separated series values',
        'type': 'str',
        'default': '',
    },
    'series_b': {
        'prompt': 'Second series:',
        'hint': 'Space separated d0 values with de fixed to de_b',
        'type': 'str',
        'default': '',
    },
    'de_b': {
        'prompt': 'Second series de:',
        'type': 'float',
        'default': 0.4,
    },
    'workers': {
        'prompt': 'Workers:',
        'hint': 'Process pool size for --parallel, 0 for CPU count',
        'type': 'int',
        'default': 0,
    },
    'digits': {
        'prompt': 'Digits:',
        'hint': 'Significant digits in CSV output',
        'type': 'int',
        'default': 12,
    },
}

_SCHEMAS = {
    'scenario': _SCENARIO_SCHEMA,
    'noise': _NOISE_SCHEMA,
    'sweep': _SWEEP_SCHEMA,
}

# flag attribute -> config section and key
_FLAGS = (
    ('q0', 'scenario', 'q0'),
    ('s', 'scenario', 's'),
    ('eta_ab', 'scenario', 'eta_ab'),
    ('eta_ent', 'noise', 'eta_ent'),
    ('eta_det', 'noise', 'eta_det'),
    ('d0', 'noise', 'd0'),
    ('de', 'noise', 'de'),
    ('noise', 'noise', 'noise'),
    ('var', 'sweep', 'var'),
    ('start', 'sweep', 'start'),
    ('stop', 'sweep', 'stop'),
    ('steps', 'sweep', 'steps'),
    ('structure', 'sweep', 'structure'),
    ('format', 'sweep', 'format'),
    ('accounting', 'sweep', 'accounting'),
    ('model', 'sweep', 'model'),
)


class UsageError(ValueError):
    """Invalid command line."""
    pass


class _parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def load_config(args, recipe=None):
    """Return the sweep configuration for args.

    Raises:
        ParameterError: On unknown sections, keys or bad values.

    """
    cfg = jsonconfig.config()
    for section, schema in _SCHEMAS.items():
        cfg.add_section(section, schema)
    cfg.merge(sdqkd.sysconf, 'sweep')
    if recipe is not None:
        cfg.import_csv_text(sdqkd.resource_text(recipe))
    if getattr(args, 'config', None):
        cfg.import_csv(args.config)
    problems = []
    for section in cfg.sections():
        if section in _SCHEMAS:
            problems.extend(cfg.check_section(section))
        else:
            problems.append('unknown section ' + section)
    if problems:
        raise scenario.ParameterError(['config'], '; '.join(problems))
    for attr, section, key in _FLAGS:
        v = getattr(args, attr, None)
        if v is not None:
            cfg.set(section, key, v)
    return cfg


def _series(cfg, key):
    text = cfg.get_value('sweep', key) or ''
    try:
        return [float(v) for v in text.split()]
    except ValueError:
        raise scenario.ParameterError([key], 'series must be numbers: ' +
                                      repr(text)) from None


def sweep_grid(cfg):
    """Return the sweep points from start, stop and steps."""
    start = cfg.get_value('sweep', 'start')
    stop = cfg.get_value('sweep', 'stop')
    steps = cfg.get_value('sweep', 'steps')
    bad = []
    if steps < 2:
        bad.append('steps')
    if not start < stop:
        bad.extend(['start', 'stop'])
    if bad:
        raise scenario.ParameterError(bad, 'need steps >= 2 and start < stop')
    return [float(v) for v in np.linspace(start, stop, steps)]


def _noise(cfg, **kw):
    vals = {
        'eta_ent': cfg.get_value('noise', 'eta_ent'),
        'kind': cfg.get_value('noise', 'noise'),
        'd0': cfg.get_value('noise', 'd0'),
        'de': cfg.get_value('noise', 'de'),
        'eta_det': cfg.get_value('noise', 'eta_det'),
    }
    vals.update(kw)
    return optics.noise(**vals)


def _check_point(q0, s, eta_ab):
    """Validate the scenario fields together, listing every bad one."""
    scenario.params(q0=q0, s=s, eta_ab=eta_ab)


def _pmap(fn, jobs, workers):
    """Map fn over jobs in order, in a process pool if workers is set.

    Pool workers run sdqkd.init() so they share the system tolerances.
    """
    if workers is None:
        return [fn(j) for j in jobs]
    _log.info('Evaluating %d points with %d workers', len(jobs), workers)
    with ProcessPoolExecutor(max_workers=workers,
                             initializer=sdqkd.init) as pool:
        return list(pool.map(fn, jobs))


def _workers(args, cfg):
    if getattr(args, 'parallel', None) is None:
        return None
    return (args.parallel or cfg.get_value('sweep', 'workers') or
            os.cpu_count() or 1)


def _fig3_point(job):
    q0, s, eta_ab, audit = job
    q1 = 1.0 - q0
    alpha0, alpha1 = scenario.optimal_bob_alphas(q0, q1, s)
    p, report = eavesdrop.optimal_success_prob(q0, q1, s, eta_ab)
    row = [
        s, report.f0, report.f1,
        eavesdrop.interior_value(alpha0, alpha1, s, eta_ab),
        eavesdrop.boundary_value(alpha0, alpha1, eta_ab), p, report.kind
    ]
    if audit:
        row.append(eavesdrop.brute_force_optimum(q0, q1, s, eta_ab))
        row.append(
            eavesdrop.brute_force_optimum(q0,
                                          q1,
                                          s,
                                          eta_ab,
                                          grid_n=eavesdrop.AUDIT_GRID,
                                          audit=True))
    return row


def cmd_fig3(args, cfg):
    """Optimal success probability and branch report against s."""
    q0 = cfg.get_value('scenario', 'q0')
    eta_ab = cfg.get_value('scenario', 'eta_ab')
    _check_point(q0, 0.0, eta_ab)
    header = [
        's', 'f0', 'f1', 'p_opt_interior', 'p_opt_boundary', 'p_opt', 'branch'
    ]
    if args.audit:
        header.extend(['p_brute', 'p_audit'])
    jobs = [(q0, s, eta_ab, args.audit) for s in sweep_grid(cfg)]
    return header, _pmap(_fig3_point, jobs, _workers(args, cfg))


def _fig5_point(job):
    q0, s, eta_ab, structure = job
    p = eavesdrop.optimal_params(q0, s, eta_ab)
    return [eta_ab, s, keyrate.secret_key_rate(p, structure)]


def cmd_fig5(args, cfg):
    """Key rate against s, one series per channel efficiency."""
    q0 = cfg.get_value('scenario', 'q0')
    structure = cfg.get_value('sweep', 'structure')
    etas = _series(cfg, 'series')
    if args.eta_ab is not None:
        etas = [args.eta_ab]
    for eta_ab in etas:
        _check_point(q0, 0.0, eta_ab)
    jobs = [(q0, s, eta_ab, structure) for eta_ab in etas
            for s in sweep_grid(cfg)]
    return ['eta_ab', 's', 'k'], _pmap(_fig5_point, jobs,
                                      _workers(args, cfg))


def _optics_point(job):
    q0, s, eta_ab, n, accounting = job
    p = scenario.params(q0=q0, s=s, eta_ab=eta_ab)
    p_s = optics.noisy_success_prob(p, n)
    k = optics.noisy_secret_key_rate(p, n, accounting)
    return p_s, k


def cmd_fig7(args, cfg):
    """Noisy success probability and key rate for both noise kinds.

    Series in the first panel damp both legs equally with each value
    of series, the second panel uses each d0 of series_b with de set
    to de_b. Explicit --d0 or --de flags select one custom series.
    """
    q0 = cfg.get_value('scenario', 'q0')
    eta_ab = cfg.get_value('scenario', 'eta_ab')
    accounting = cfg.get_value('sweep', 'accounting')
    _check_point(q0, 0.0, eta_ab)
    kinds = scenario.NOISE_KINDS
    if args.noise is not None:
        kinds = (args.noise, )
    if args.d0 is not None or args.de is not None:
        damping = [('custom', cfg.get_value('noise', 'd0'),
                    cfg.get_value('noise', 'de'))]
    else:
        damping = [('a', d, d) for d in _series(cfg, 'series')]
        de_b = cfg.get_value('sweep', 'de_b')
        damping.extend(('b', d0, de_b) for d0 in _series(cfg, 'series_b'))
    series = []
    jobs = []
    for kind in kinds:
        for panel, d0, de in damping:
            n = _noise(cfg, kind=kind, d0=d0, de=de)
            for s in sweep_grid(cfg):
                series.append((s, kind, d0, de, panel))
                jobs.append((q0, s, eta_ab, n, accounting))
    results = _pmap(_optics_point, jobs, _workers(args, cfg))
    rows = []
    for (s, kind, d0, de, panel), (p_s, k) in zip(series, results):
        rows.append([s, p_s, k, kind, d0, de, panel])
    return ['s', 'p_s', 'k', 'kind', 'd0', 'de', 'panel'], rows


def _sweep_point(job):
    var, x, q0, s, eta_ab, structure, model, n, accounting = job
    if var == 's':
        s = x
    elif var == 'eta_ab':
        eta_ab = x
    if model == MODEL_OPTICS:
        if var == 'd':
            n = n.replace(d0=x, de=x)
        return [x] + list(_optics_point((q0, s, eta_ab, n, accounting)))
    p = eavesdrop.optimal_params(q0, s, eta_ab)
    return [
        x,
        eavesdrop.success_prob(p, structure),
        keyrate.secret_key_rate(p, structure)
    ]


def cmd_sweep(args, cfg):
    """Sweep one variable reporting p_s and k."""
    var = cfg.get_value('sweep', 'var')
    model = cfg.get_value('sweep', 'model')
    q0 = cfg.get_value('scenario', 'q0')
    s = cfg.get_value('scenario', 's')
    eta_ab = cfg.get_value('scenario', 'eta_ab')
    if var == 'd' and model != MODEL_OPTICS:
        raise scenario.ParameterError(['var'], 'd sweeps need --model optics')
    _check_point(q0, s, eta_ab)
    n = _noise(cfg)
    jobs = [(var, x, q0, s, eta_ab, cfg.get_value('sweep', 'structure'),
             model, n, cfg.get_value('sweep', 'accounting'))
            for x in sweep_grid(cfg)]
    return [var, 'p_s', 'k'], _pmap(_sweep_point, jobs, _workers(args, cfg))


def cmd_point(args, cfg):
    """Return a record of every intermediate quantity at one point."""
    q0 = cfg.get_value('scenario', 'q0')
    s = cfg.get_value('scenario', 's')
    eta_ab = cfg.get_value('scenario', 'eta_ab')
    _check_point(q0, s, eta_ab)
    p = eavesdrop.optimal_params(q0, s, eta_ab)
    p_opt, branch = eavesdrop.optimal_success_prob(p.q0, p.q1, s, eta_ab)
    ret = keyrate.report(p)
    ret['branch'] = branch.as_dict()
    ret['p_s_optimal'] = p_opt
    return ret


def _record(api, body):
    ret = {
        'api': 'sdqkd.' + api,
        'apiversion': sdqkd.APIVERSION,
        'libversion': sdqkd.VERSION,
    }
    ret.update(body)
    return ret


@contextlib.contextmanager
def _output(args):
    if getattr(args, 'out', None):
        with sdqkd.savefile(args.out, newline='') as f:
            yield f
    else:
        yield sys.stdout


def _cell(v, fmt):
    if isinstance(v, float):
        return fmt.format(v)
    return str(v)


def write_table(f, header, rows, digits=12):
    """Write rows as CSV with LF line ends and digits significant figures."""
    fmt = '{:.' + str(int(digits)) + 'g}'
    cw = csv.writer(f, lineterminator='\n')
    cw.writerow(header)
    for r in rows:
        cw.writerow([_cell(v, fmt) for v in r])


def write_record(f, rec):
    json.dump(rec, f, indent=1, sort_keys=True, cls=jsonconfig.encoder)
    f.write('\n')


def _emit_table(args, cfg, api, header, rows):
    with _output(args) as f:
        if cfg.get_value('sweep', 'format') == 'json':
            write_record(
                f,
                _record(
                    api, {
                        'columns': header,
                        'rows': rows,
                        'config': {
                            sec: cfg.export_dict(sec)
                            for sec in _SCHEMAS
                        },
                    }))
        else:
            write_table(f, header, rows, cfg.get_value('sweep', 'digits'))
    return EXIT_OK


def _selfcheck_measurements(rng):
    worst = 0.0
    for _ in range(SELFCHECK_DRAWS):
        p = scenario.draw_params(rng)
        bob = scenario.bob_povm(p.s, p.alpha0, p.alpha1)
        eve = scenario.eve_povm(p.s, p.u0, p.u1)
        kraus = scenario.bob_kraus(p.s, p.alpha0, p.alpha1)
        worst = max(
            worst, qmath.completeness_residual(bob.values(), scenario.BOB),
            qmath.completeness_residual(eve.values(), scenario.EVE),
            qmath.completeness_residual([k.dag() @ k for k in kraus.values()],
                                        scenario.BOB))
        for el in list(bob.values()) + list(eve.values()):
            if not qmath.is_psd(el):
                return False, 'non-PSD element at {!r}'.format(p)
    return worst < qmath.PSD_TOL, 'max residual {:.3g}'.format(worst)


def _selfcheck_overlap(rng):
    worst = 0.0
    for s in np.linspace(0.0, 0.95, 20):
        ov = (scenario.psi_tilde(s, 0).dag() @ scenario.psi_tilde(s, 1)).mat
        worst = max(worst, abs(ov[0, 0] + s))
    return worst < qmath.TOL, 'max deviation {:.3g}'.format(worst)


def _selfcheck_optics_maps(rng):
    worst = 0.0
    for s in np.linspace(0.0, 0.95, 20):
        worst = max(worst, qmath.unitarity_residual(optics.sagnac_bob(s)),
                    qmath.unitarity_residual(optics.sagnac_eve(s)))
    worst = max(worst,
                qmath.unitarity_residual(optics.hwp(optics.HADAMARD_ANGLE)),
                qmath.unitarity_residual(optics.pbs()))
    p = scenario.params(q0=0.5, s=0.4, eta_ab=0.5)
    n = optics.noise(eta_ent=0.5, kind=scenario.NOISE_COLORED, d0=0.2,
                     de=0.3, eta_det=0.8)
    zeta = optics.build_zeta(p, n, 0)
    worst = max(worst, abs(zeta.trace().real - 1.0))
    if not qmath.is_psd(zeta):
        return False, 'shared optical state is not PSD'
    return worst < qmath.TOL, 'max residual {:.3g}'.format(worst)


def _selfcheck_distributions(rng):
    worst = 0.0
    for _ in range(SELFCHECK_DRAWS):
        p = scenario.draw_params(rng)
        d1, ab, be = keyrate.tables(p, scenario.STRUCT_TYPE1)
        d2 = keyrate.joint_abe(p, scenario.STRUCT_TYPE2)
        worst = max(worst, d1.max_abs_diff(d2), abs(d1.total() - 1.0),
                    abs(ab.total() - 1.0), abs(be.total() - 1.0))
        for d, size in ((ab, 4), (be, 6), (be.marginal('e'), 2)):
            h = keyrate.entropy(d)
            if h < -qmath.TOL or h > math.log2(size) + qmath.TOL:
                return False, 'entropy {} out of bounds at {!r}'.format(h, p)
        k = keyrate.key_terms((p.q0, p.q1), ab, be)['k']
        if k < 0.0:
            return False, 'negative key rate at {!r}'.format(p)
    return worst < qmath.TOL, 'max deviation {:.3g}'.format(worst)


def _selfcheck_branch(rng):
    root = eavesdrop.branch_root(0.4)
    if root is None or abs(root - 0.6538) > 1e-3:
        return False, 'branch root {!r}'.format(root)
    below = eavesdrop.optimal_success_prob(0.4, 0.6, root - 1e-9, 0.5)[0]
    above = eavesdrop.optimal_success_prob(0.4, 0.6, root + 1e-9, 0.5)[0]
    return abs(below - above) < 1e-6, 'root {:.6f}'.format(root)


def _selfcheck_oracle(rng):
    worst = 0.0
    for q0 in (0.4, 0.5):
        for s in np.linspace(0.05, 0.75, 8):
            closed = eavesdrop.optimal_success_prob(q0, 1.0 - q0, s, 0.5)[0]
            brute = eavesdrop.brute_force_optimum(q0, 1.0 - q0, s, 0.5)
            audit = eavesdrop.brute_force_optimum(
                q0, 1.0 - q0, s, 0.5, grid_n=eavesdrop.AUDIT_GRID, audit=True)
            worst = max(worst, abs(closed - brute), abs(closed - audit))
    return worst < 1e-4, 'max deviation {:.3g}'.format(worst)


def _selfcheck_peak(rng):
    grid = np.linspace(0.35, 0.55, 41)
    ks = [
        keyrate.secret_key_rate(eavesdrop.optimal_params(0.5, s, 0.9))
        for s in grid
    ]
    peak = float(grid[int(np.argmax(ks))])
    return abs(peak - 0.4585) <= 0.01, 'peak at s={:.4f}'.format(peak)


def _selfcheck_ideal_optics(rng):
    worst = 0.0
    for s in np.linspace(0.05, 0.85, 10):
        p = eavesdrop.optimal_params(0.5, s, 0.5)
        abe, unreg = optics.noisy_tables(p, optics.IDEAL)
        worst = max(
            worst, abe.max_abs_diff(keyrate.joint_abe(p)),
            abs(
                optics.noisy_success_prob(p, optics.IDEAL) -
                eavesdrop.success_prob(p)),
            abs(
                optics.noisy_secret_key_rate(p, optics.IDEAL) -
                keyrate.secret_key_rate(p)))
    return worst < 1e-10, 'max deviation {:.3g}'.format(worst)


def _diff(x, y):
    return float(np.max(np.abs(x.mat - y.mat)))


def _selfcheck_marginals(rng):
    worst = 0.0
    for s in np.linspace(0.0, 0.8, 5):
        for eta in np.linspace(0.0, 1.0, 5):
            for a in scenario.BITS:
                ref = scenario.depolarized_state(s, eta, a)
                gamma = qmath.dm(scenario.gamma_state(s, eta, a))
                sigma = scenario.sigma_state(s, eta, a)
                worst = max(worst,
                            _diff(qmath.partial_trace(gamma, keep='B'), ref),
                            _diff(qmath.partial_trace(sigma, keep='B'), ref))
    return worst < qmath.TOL, 'max deviation {:.3g}'.format(worst)


def _selfcheck_partial_trace(rng):
    worst = 0.0
    for _ in range(SELFCHECK_DRAWS):
        ga = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        gb = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        a = qmath.qop(ga @ ga.conj().T, scenario.BOB)
        b = qmath.qop(gb @ gb.conj().T, scenario.EVE)
        out = qmath.partial_trace(qmath.tensor(a, b), keep='B')
        worst = max(worst, _diff(out, a * b.trace().real))
    return worst < 1e-10, 'max deviation {:.3g}'.format(worst)


def _selfcheck_channels(rng):
    worst = 0.0
    for kind in scenario.NOISE_KINDS:
        for eta in np.linspace(0.0, 1.0, 5):
            rho = optics.noisy_entangled(eta, kind)
            worst = max(worst, abs(rho.trace().real - 1.0))
            for d in np.linspace(0.0, 1.0, 5):
                for leg in ('B', 'E'):
                    out = optics.amplitude_damping(rho, d, leg)
                    worst = max(worst, abs(out.trace().real - 1.0))
                    if not qmath.is_psd(out):
                        return False, 'damped state not PSD ({}, {:g})'.format(
                            kind, d)
    return worst < 1e-10, 'max trace residual {:.3g}'.format(worst)


def _selfcheck_optimum_scaling(rng):
    worst = 0.0
    for q0 in (0.4, 0.5):
        for s in (0.1, 0.4, 0.7):
            ratios = [
                eavesdrop.optimal_success_prob(q0, 1.0 - q0, s, eta)[0] /
                (1.0 - eta) for eta in np.linspace(0.1, 0.9, 9)
            ]
            worst = max(worst, max(ratios) - min(ratios))
    return worst < qmath.TOL, 'max ratio spread {:.3g}'.format(worst)


def _selfcheck_optimum_feasible(rng):
    worst = 0.0
    for q0 in (0.3, 0.4, 0.5):
        limit = scenario.validity_limit(q0, 1.0 - q0)
        for s in np.linspace(0.0, 0.99 * limit, 25):
            u0, u1 = eavesdrop.branch_report(q0, 1.0 - q0, s).optimal_u
            worst = max(worst, s * s - (1.0 - u0) * (1.0 - u1))
    return worst <= qmath.TOL, 'max constraint excess {:.3g}'.format(worst)


def _selfcheck_noise_order(rng):
    worst = -1.0
    for d in (0.1, 0.2, 0.3):
        for s in np.arange(1, 19) * 0.05:
            p = eavesdrop.optimal_params(0.5, s, 0.5)
            ps = [
                optics.noisy_success_prob(
                    p,
                    optics.noise(eta_ent=0.5, kind=kind, d0=d, de=d,
                                 eta_det=0.8)) for kind in scenario.NOISE_KINDS
            ]
            values = dict(zip(scenario.NOISE_KINDS, ps))
            worst = max(
                worst,
                values[scenario.NOISE_COLORED] - values[scenario.NOISE_WHITE])
    return worst <= qmath.TOL, 'max colored excess {:.3g}'.format(worst)


def _selfcheck_fault(rng):
    povm = scenario.bob_povm(0.5, 0.5, 0.5)
    res = qmath.completeness_residual(povm.values(), scenario.BOB)
    return res < -1.0, 'injected tolerance violation {:.3g}'.format(res)


SELFCHECKS = (
    ('measurement completeness', _selfcheck_measurements),
    ('conditional overlap', _selfcheck_overlap),
    ('optical maps', _selfcheck_optics_maps),
    ('distributions', _selfcheck_distributions),
    ('branch point', _selfcheck_branch),
    ('optimisation oracle', _selfcheck_oracle),
    ('key rate peak', _selfcheck_peak),
    ('ideal optics limit', _selfcheck_ideal_optics),
    ('state marginals', _selfcheck_marginals),
    ('partial trace of products', _selfcheck_partial_trace),
    ('channel trace preservation', _selfcheck_channels),
    ('optimum scaling in efficiency', _selfcheck_optimum_scaling),
    ('optimum feasibility', _selfcheck_optimum_feasible),
    ('colored noise ordering', _selfcheck_noise_order),
)


def cmd_selfcheck(args, cfg):
    """Run the invariant suite, return EXIT_NUMERIC on any failure."""
    rng = np.random.default_rng(SELFCHECK_SEED)
    checks = list(SELFCHECKS)
    if args.inject_fault:
        checks.append(('injected fault', _selfcheck_fault))
    failed = 0
    with _output(args) as f:
        for name, fn in checks:
            try:
                ok, detail = fn(rng)
            except (ValueError, RuntimeError) as e:
                ok, detail = False, '{}: {}'.format(e.__class__.__name__, e)
            if not ok:
                failed += 1
                _log.error('Self check %r failed: %s', name, detail)
            f.write('{} {}: {}\n'.format('PASS' if ok else 'FAIL', name,
                                         detail))
        f.write('{} passed, {} failed\n'.format(len(checks) - failed, failed))
    return EXIT_NUMERIC if failed else EXIT_OK


def _run_table(cmd, api):

    def run(args, cfg):
        header, rows = cmd(args, cfg)
        return _emit_table(args, cfg, api, header, rows)

    return run


def _run_point(args, cfg):
    with _output(args) as f:
        write_record(f, _record('point', cmd_point(args, cfg)))
    return EXIT_OK


# subcommand -> (handler, packaged recipe, help)
COMMANDS = {
    'fig3': (_run_table(cmd_fig3, 'fig3'), 'fig3.csv',
             'optimal success probability and branch against s'),
    'fig5': (_run_table(cmd_fig5, 'fig5'), 'fig5.csv',
             'key rate against s for several channel efficiencies'),
    'fig7': (_run_table(cmd_fig7, 'fig7'), 'fig7.csv',
             'noisy success probability and key rate'),
    'point': (_run_point, None, 'record of every quantity at one point'),
    'sweep': (_run_table(cmd_sweep, 'sweep'), None,
              'sweep s, eta_ab or d with either model'),
    'selfcheck': (cmd_selfcheck, None, 'run the invariant suite'),
}


def _number(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError('not a number: ' +
                                         repr(text)) from None


def build_parser():
    common = _parser(add_help=False)
    common.add_argument('--config', help='recipe file of key,value rows')
    common.add_argument('--q0', type=_number, help='prior of bit 0')
    common.add_argument('--s', type=_number, help='overlap of the states')
    common.add_argument('--eta-ab', dest='eta_ab', type=_number,
                        help='channel efficiency')
    common.add_argument('--eta-ent', dest='eta_ent', type=_number,
                        help='entanglement weight')
    common.add_argument('--eta-det', dest='eta_det', type=_number,
                        help='detector efficiency')
    common.add_argument('--d0', type=_number, help='damping Alice to Bob')
    common.add_argument('--de', type=_number, help='damping entangled legs')
    common.add_argument('--noise', choices=scenario.NOISE_KINDS)
    common.add_argument('--structure', choices=scenario.STRUCTURES)
    common.add_argument('--var', choices=SWEEP_VARS, help='sweep variable')
    common.add_argument('--start', type=_number, help='sweep start')
    common.add_argument('--stop', type=_number, help='sweep stop')
    common.add_argument('--steps', type=int, help='number of sweep points')
    common.add_argument('--model', choices=MODELS)
    common.add_argument('--accounting', choices=optics.ACCOUNTING,
                        help='treatment of unregistered rounds')
    common.add_argument('--out', help='output file, default stdout')
    common.add_argument('--format', choices=FORMATS)
    common.add_argument('--audit', action='store_true',
                        help='add brute force columns')
    common.add_argument('--parallel', type=int, nargs='?', const=0,
                        metavar='N', help='evaluate points in N processes')
    common.add_argument('--verbose', action='store_true')
    common.add_argument('--debug', action='store_true')
    common.add_argument('--inject-fault', dest='inject_fault',
                        action='store_true', help=argparse.SUPPRESS)

    parser = _parser(prog='sdqkd',
                     description='Eavesdropping and key rate sweeps.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + sdqkd.VERSION)
    sub = parser.add_subparsers(dest='command')
    for name, (handler, recipe, text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _logging(args):
    level = sdqkd.LOGLEVEL
    if args.debug:
        level = logging.DEBUG
    elif args.verbose:
        level = logging.INFO
    ch = logging.StreamHandler()
    ch.setLevel(level)
    ch.setFormatter(logging.Formatter(sdqkd.LOGFORMAT))
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.addHandler(ch)
    return ch


def main(argv=None):
    """Run the command line, return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write('sdqkd: error: {}\n'.format(e))
        return EXIT_INVALID
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INVALID

    handler = _logging(args)
    try:
        sdqkd.init()
        run, recipe, text = COMMANDS[args.command]
        return run(args, load_config(args, recipe))
    except (scenario.ParameterError, scenario.ConstraintError,
            scenario.ValidityError, qmath.LabelError, UsageError) as e:
        _log.error('%s: %s', e.__class__.__name__, e)
        return EXIT_INVALID
    except (optics.PipelineError, keyrate.DegenerateError) as e:
        _log.error('%s: %s', e.__class__.__name__, e)
        return EXIT_NUMERIC
    except OSError as e:
        _log.error('%s on %r: %s', e.__class__.__name__, e.filename,
                   e.strerror or e)
        return EXIT_IO
    finally:
        logging.getLogger().removeHandler(handler)


if __name__ == '__main__':
    sys.exit(main())
