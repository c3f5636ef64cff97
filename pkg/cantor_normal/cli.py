import argparse
import json
import sys
from itertools import islice

import numpy as np
import pandas as pd

from cantor_normal.constants import (DEFAULT_MAX_D, DEFAULT_MAX_H, EXIT_DESCRIPTOR, EXIT_FAILURE, EXIT_GUARD,
                                     EXIT_OK, MATERIALIZATION_CAP, MODES, PLAIN, PRESETS, TYPE_I, VARIANTS)
from cantor_normal.constructions import AS_WRITTEN, DESK, EXACT, L_RULES, check_good_conditions
from cantor_normal.descriptors import parse_pair, parse_preset, split_top
from cantor_normal.digits import DigitRangeError
from cantor_normal.diophantine import APConstraint, RelationSystem, epsilon_frontier, solve_box, solve_exact
from cantor_normal.experiments import run_experiment
from cantor_normal.sequences import InvalidSequenceError
from cantor_normal.stats import count_stream, count_stream_parallel, ratio_normality_series
from cantor_normal.utils import (DescriptorError, GuardError, geometric_checkpoints, parse_block, parse_fractions,
                                 parse_ints, read_manifest, write_digits)


def log(msg):
    print(msg, file=sys.stderr)


def _preset_text(name, scale, params, l_rule):
    text = 'preset:%s;scale=%s' % (name, scale)
    for item in params or []:
        if '=' not in item:
            raise DescriptorError("Preset parameters look like key=value, got %r" % item)
        text += ';' + item
    if l_rule != AS_WRITTEN:
        text += ';l=' + l_rule
    return text


def _write_frame(df, out):
    if out is None:
        df.to_csv(sys.stdout, index=False)
    else:
        log('Writing results to %s...' % out)
        df.to_csv(out, index=False)


def cmd_preset(args):
    p = parse_preset(_preset_text(args.name, args.scale, args.param, args.l_rule))
    print('preset: %s' % p.descriptor)
    print('x: %s' % p.x.descriptor)
    print('Q: %s' % p.Q.descriptor)
    if p.c is not None:
        print('c: %s  d: %d' % (', '.join(str(cj) for cj in p.c), p.d))
    for note in p.notes:
        print('note: %s' % note)
    if p.predicted is not None and len(p.predicted):
        with pd.option_context('display.max_rows', None, 'display.width', 120):
            print(p.predicted.to_string(index=False))


def cmd_gen_digits(args):
    if args.n > MATERIALIZATION_CAP:
        raise GuardError("Refusing to write %d digits (cap is %d)." % (args.n, MATERIALIZATION_CAP))
    x, Q = parse_pair(args.construction, args.q)
    log('Generating %d digits of %s...' % (args.n, x.descriptor))
    digits = list(islice(x.cursor(args.start), args.n))
    for j, e in enumerate(digits, args.start):
        if not Q.accepts(j, e):
            raise DigitRangeError("E_%d = %d is outside [0, q_%d - 1] for %s" % (j, e, j, Q.descriptor))
    log('Writing results to %s...' % args.out)
    write_digits(digits, args.out, 'x=%s Q=%s start=%d' % (x.descriptor, Q.descriptor, args.start))


def _checkpoints(args):
    if args.checkpoints:
        return parse_ints(args.checkpoints)
    return geometric_checkpoints(args.horizon, args.growth)


def cmd_count(args):
    x, Q = parse_pair(args.x, args.q)
    blocks = [parse_block(b) for b in split_top(args.blocks)]
    log('Counting %d blocks of %s up to n=%d...' % (len(blocks), x.descriptor, args.horizon))
    kwargs = dict(mode=args.mode, m=args.m, r=args.r, horizon=args.horizon, checkpoints=_checkpoints(args),
                  progress=args.progress)
    if args.workers > 1:
        series = count_stream_parallel(x, Q, blocks, num_replicas=args.workers, **kwargs)
    else:
        series = count_stream(x, Q, blocks, **kwargs)
    if args.json is not None:
        log('Writing results to %s...' % args.json)
        series.to_json(args.json, {'x': x.descriptor, 'q': Q.descriptor, 'mode': args.mode, 'm': str(args.m),
                                   'r': str(args.r), 'horizon': str(args.horizon)})
    _write_frame(series.frame, args.out)


def cmd_ratios(args):
    x, Q = parse_pair(args.x, args.q)
    df = ratio_normality_series(x, Q, parse_block(args.b1), parse_block(args.b2), args.horizon,
                                _checkpoints(args), args.mode, args.m, args.r)
    _write_frame(df, args.out)


def _ap_constraint(text):
    parts = text.split(':')
    if len(parts) not in (3, 4):
        raise DescriptorError("AP constraints look like k:m:r[:typeI|typeII], got %r" % text)
    variant = parts[3] if len(parts) == 4 else TYPE_I
    if variant not in VARIANTS:
        raise DescriptorError("Unknown variant %r; choose from %s" % (variant, VARIANTS))
    try:
        k, m, r = (int(p) for p in parts[:3])
    except ValueError:
        raise DescriptorError("AP constraints look like k:m:r[:typeI|typeII], got %r" % text)
    return APConstraint(k, m, r, variant)


def cmd_solve_dioph(args):
    ap = [_ap_constraint(a) for a in args.ap or []]
    system = RelationSystem(args.t, parse_ints(args.A), parse_ints(args.B) if args.B else None, ap)
    log('Searching %s...' % system)
    result = solve_exact(system, args.max_h, args.max_d, args.workers, args.progress)
    log(result.report())
    out = {'t': system.t, 'A': system.A, 'B': system.B,
           'ap': [{'k': con.k, 'm': con.m, 'r': con.r, 'variant': con.variant} for con in system.ap],
           'max_h': args.max_h, 'max_d': args.max_d, 'candidates': result.candidates, 'found': result.found}
    if result.found:
        out['c'] = [str(cj) for cj in result.solution.c]
        out['d'] = result.solution.d
        out['certificate'] = result.certificate.to_dict()
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out is None:
        print(text)
    else:
        log('Writing results to %s...' % args.out)
        with open(args.out, 'w') as f:
            f.write(text + '\n')


def _eps(text, t):
    if text is None:
        return np.zeros(t)
    values = [float(v) for v in parse_fractions(text)]
    if len(values) == 1:
        return np.full(t, values[0])
    if len(values) != t:
        raise DescriptorError("--eps needs 1 or %d values, got %d" % (t, len(values)))
    return np.array(values)


def cmd_solve_box(args):
    if args.frontier:
        direction = _eps(args.eps, args.t) if args.eps else None
        front = epsilon_frontier(args.t, direction, args.max_scale, args.tol, args.progress)
        log('largest converging scale %.6g (|eps| = %.6g)' % (front.scale, front.eps_norm))
        if front.solution is None:
            raise RuntimeError("solve_box does not converge even at eps = 0 for t=%d" % args.t)
        sol = front.solution
    else:
        sol = solve_box(args.t, _eps(args.eps, args.t))
        log('%s after %d iterations (%s): max residual %.3g%s' % (
            'converged' if sol.converged else 'did not converge', sol.iterations, sol.method, sol.max_residual,
            ', left the box on the way' if sol.escaped else ''))
        if sol.bounds is not None and sol.bounds.empty:
            log(sol.message)
            if sol.outside_root is not None:
                log('root outside the box: c = %s' % np.array2string(sol.outside_root, precision=6))
    _write_frame(sol.to_frame(), args.out)
    if not sol.converged:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_check_good(args):
    p = parse_preset(_preset_text(args.preset, args.scale, args.param, args.l_rule))
    stop = args.stop
    if stop is None:
        stop = len(p.schedule) - 1 if p.schedule.finite else 8
    log('Checking good conditions of %s on i = %d..%d...' % (p.schedule.descriptor, args.start, stop))
    report = check_good_conditions(p.schedule, args.k, args.m, args.start, stop)
    for name, verdict in report.verdicts.items():
        log('%s: %s' % (name, verdict))
    if args.out is None:
        with pd.option_context('display.max_rows', None, 'display.width', 160):
            print(report.frame.to_string(index=False))
    else:
        _write_frame(report.frame, args.out)


def cmd_run(args):
    log('Loading %s...' % args.manifest)
    manifest = read_manifest(args.manifest)
    result = run_experiment(manifest, args.out_dir, args.progress)
    if result.out_dir is not None:
        log('Wrote %s' % result.out_dir)
    limits = pd.DataFrame(result.summary['limits'])
    with pd.option_context('display.max_rows', None, 'display.width', 160):
        print(limits.to_string(index=False))


def build_parser():
    parser = argparse.ArgumentParser(prog='cantor', description='Normality of Q-Cantor series expansions.')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('preset', help='describe a named construction')
    p.add_argument('name', choices=PRESETS)
    p.add_argument('--scale', default=EXACT, choices=(EXACT, DESK))
    p.add_argument('--param', nargs='*', help='key=value preset parameters, e.g. t=3 or c=2,1,2')
    p.add_argument('--l_rule', default=AS_WRITTEN, choices=L_RULES)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser('gen-digits', help='write the first digits of a stream')
    p.add_argument('--construction', required=True)
    p.add_argument('--q', default=None)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--start', type=int, default=1)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_gen_digits)

    for name, func in (('count', cmd_count), ('ratios', cmd_ratios)):
        p = sub.add_parser(name)
        p.add_argument('--x', required=True)
        p.add_argument('--q', default=None)
        if name == 'count':
            p.add_argument('--blocks', required=True, help="block literals separated by ';'")
            p.add_argument('--workers', type=int, default=1)
            p.add_argument('--json', default=None)
        else:
            p.add_argument('--b1', required=True)
            p.add_argument('--b2', required=True)
        p.add_argument('--mode', default=PLAIN, choices=MODES)
        p.add_argument('--m', type=int, default=1)
        p.add_argument('--r', type=int, default=0)
        p.add_argument('--horizon', type=int, default=10 ** 4)
        p.add_argument('--growth', type=float, default=1.5)
        p.add_argument('--checkpoints', default=None)
        p.add_argument('--out', default=None)
        p.add_argument('--progress', action='store_true')
        p.set_defaults(func=func)

    p = sub.add_parser('solve-dioph', help='exact search for (c, d)')
    p.add_argument('--t', type=int, required=True)
    p.add_argument('--A', required=True)
    p.add_argument('--B', default=None)
    p.add_argument('--ap', nargs='*', help='progression constraints k:m:r[:typeI|typeII]')
    p.add_argument('--max-h', dest='max_h', type=int, default=DEFAULT_MAX_H)
    p.add_argument('--max-d', dest='max_d', type=int, default=DEFAULT_MAX_D)
    p.add_argument('--workers', type=int, default=1)
    p.add_argument('--out', default=None)
    p.add_argument('--progress', action='store_true')
    p.set_defaults(func=cmd_solve_dioph)

    p = sub.add_parser('solve-box', help='Newton solve of S_k(c) = 2t + eps_k')
    p.add_argument('--t', type=int, required=True)
    p.add_argument('--eps', default=None)
    p.add_argument('--frontier', action='store_true')
    p.add_argument('--max-scale', dest='max_scale', type=float, default=1.0)
    p.add_argument('--tol', type=float, default=1e-3)
    p.add_argument('--out', default=None)
    p.add_argument('--progress', action='store_true')
    p.set_defaults(func=cmd_solve_box)

    p = sub.add_parser('check-good', help='good-condition ratios of a schedule')
    p.add_argument('--preset', default='thm1_7', choices=PRESETS)
    p.add_argument('--scale', default=EXACT, choices=(EXACT, DESK))
    p.add_argument('--param', nargs='*')
    p.add_argument('--l_rule', default=AS_WRITTEN, choices=L_RULES)
    p.add_argument('--k', type=int, default=2)
    p.add_argument('--m', type=int, default=1)
    p.add_argument('--start', type=int, default=2)
    p.add_argument('--stop', type=int, default=None)
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_check_good)

    p = sub.add_parser('run', help='run an experiment manifest')
    p.add_argument('manifest')
    p.add_argument('--out_dir', default=None)
    p.add_argument('--progress', action='store_true')
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except GuardError as e:
        log('guard: %s' % e)
        return EXIT_GUARD
    except (DescriptorError, InvalidSequenceError, DigitRangeError) as e:
        log('invalid input: %s' % e)
        return EXIT_DESCRIPTOR
    except Exception as e:
        log('error: %s' % e)
        return EXIT_FAILURE
    return EXIT_OK if code is None else code


if __name__ == '__main__':
    sys.exit(main())
