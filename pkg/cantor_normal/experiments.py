"""Manifest-driven experiment runs.

A manifest is a plain `key = value` file:

    name = thm1_13_desk
    x = preset:thm1_13;scale=desk;c=2,1,2;d=4
    blocks = (0);(0,0)
    modes = plain,apI,apII
    m = 2
    horizon = 1400192

`q` overrides the sequence the stream is counted against, `residues`
restricts r (default every r in [0, m-1]), `growth` sets the checkpoint
spacing and `workers` > 1 switches to chunk-parallel counting. A run writes
series.csv and summary.json to the output directory; two runs of one
manifest write byte-identical CSV.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict
import json
import os
import warnings

import numpy as np
import pandas as pd

from cantor_normal.blocks import Block
from cantor_normal.constants import (AP_II, CHECKPOINT_GROWTH, LIMIT_TOLERANCE, MATERIALIZATION_CAP, MODES,
                                     PLAIN, RESULTS_DIR, VERSION)
from cantor_normal.descriptors import parse_construction, parse_fields, parse_preset, parse_sequence, split_top
from cantor_normal.digits import RandomUniformStream
from cantor_normal.stats import count_stream, count_stream_parallel
from cantor_normal.utils import DescriptorError, GuardError, geometric_checkpoints, parse_block, parse_ints, \
    write_manifest

REQUIRED_KEYS = ('x', 'blocks', 'horizon')
KNOWN_KEYS = REQUIRED_KEYS + ('name', 'q', 'modes', 'm', 'residues', 'growth', 'workers', 'seed', 'out_dir')


@dataclass
class ExperimentResult:
    series: pd.DataFrame
    summary: Dict[str, object]
    out_dir: str = None


def _parse_manifest(manifest: Dict[str, str]):
    missing = [k for k in REQUIRED_KEYS if k not in manifest]
    if missing:
        raise DescriptorError("Manifest is missing %s" % missing)
    unknown = [k for k in manifest if k not in KNOWN_KEYS]
    if unknown:
        raise DescriptorError("Unknown manifest keys %s" % unknown)
    try:
        horizon = int(manifest['horizon'])
        m = int(manifest.get('m', 1))
        growth = float(manifest.get('growth', CHECKPOINT_GROWTH))
        workers = int(manifest.get('workers', 1))
    except ValueError as e:
        raise DescriptorError(str(e))
    if horizon > MATERIALIZATION_CAP:
        raise GuardError("horizon %d exceeds the %d digit cap." % (horizon, MATERIALIZATION_CAP))
    modes = [s.strip() for s in manifest.get('modes', PLAIN).split(',') if s.strip()]
    for mode in modes:
        if mode not in MODES:
            raise DescriptorError("Unknown mode %r; choose from %s" % (mode, MODES))
    blocks = [Block(parse_block(b)) for b in split_top(manifest['blocks'])]
    if 'residues' in manifest:
        residues = parse_ints(manifest['residues'])
    else:
        residues = list(range(m))
    return horizon, m, growth, workers, modes, blocks, residues


def _stream(x_text: str):
    """The stream and, for presets, the table of predicted limits."""
    if parse_fields(x_text).kind != 'preset':
        return parse_construction(x_text), None
    p = parse_preset(x_text)
    if p.predicted is None or len(p.predicted) == 0:
        return p.x, None
    return p.x, p.predicted


def _limit(predicted, mode, k, m, r):
    if predicted is None:
        return None
    mm, rr = (1, 0) if mode == PLAIN else (m, r)
    row = predicted[(predicted['mode'] == mode) & (predicted['k'] == k) & (predicted['m'] == mm)
                    & (predicted['r'] == rr)]
    if len(row) == 0:
        return None
    return Fraction(row['limit'].iloc[0])


def run_experiment(manifest: Dict[str, str], out_dir: str = None, progress: bool = False) -> ExperimentResult:
    """Count every (mode, r, block) of the manifest and compare the final ratios with the predicted limits."""
    horizon, m, growth, workers, modes, blocks, residues = _parse_manifest(manifest)
    x, predicted = _stream(manifest['x'])
    Q = parse_sequence(manifest['q']) if manifest.get('q') else x.Q
    if 'seed' in manifest and not isinstance(x, RandomUniformStream):
        warnings.warn("seed = %s is recorded but %s draws no random digits." % (manifest['seed'], x.descriptor))
    checkpoints = geometric_checkpoints(horizon, growth)
    frames = []
    rows = []
    for mode in modes:
        keys = [(1, 0)] if mode == PLAIN else [(m, r) for r in residues]
        for mm, r in keys:
            if mode == AP_II:
                # apII positions index the extracted stream
                cps = geometric_checkpoints(horizon // mm, growth) if horizon >= mm else []
            else:
                cps = checkpoints
            if len(cps) == 0:
                continue
            kwargs = dict(mode=mode, m=mm, r=r, horizon=cps[-1], checkpoints=cps)
            if workers > 1:
                series = count_stream_parallel(x, Q, blocks, num_replicas=workers, progress=progress, **kwargs)
            else:
                series = count_stream(x, Q, blocks, progress=progress, **kwargs)
            frames.append(series.frame)
            for B in blocks:
                last = series.final(B)
                limit = _limit(predicted, mode, len(B), mm, r)
                observed = float(last['ratio'])
                row = {'mode': mode, 'm': mm, 'r': r, 'block': str(B), 'n': int(last['n']),
                       'count': int(last['count']), 'denominator': float(last['denominator']),
                       'observed': None if np.isnan(observed) else observed,
                       'predicted': None if limit is None else str(limit),
                       'predicted_float': None if limit is None else float(limit)}
                if limit is not None and row['observed'] is not None:
                    row['within_tolerance'] = bool(abs(observed - float(limit)) <= LIMIT_TOLERANCE)
                rows.append(row)
    series = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    summary = {'manifest': dict(manifest), 'version': VERSION, 'x': x.descriptor, 'q': Q.descriptor,
               'seed': x.seed if isinstance(x, RandomUniformStream) else manifest.get('seed'),
               'horizon': horizon, 'limits': rows}
    out_dir = out_dir or manifest.get('out_dir')
    if out_dir is None and 'name' in manifest:
        out_dir = os.path.join(RESULTS_DIR, manifest['name'])
    if out_dir is not None:
        write_bundle(series, summary, out_dir)
    return ExperimentResult(series, summary, out_dir)


def write_bundle(series: pd.DataFrame, summary: Dict[str, object], out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    series.to_csv(os.path.join(out_dir, 'series.csv'), index=False, float_format='%.17g')
    with open(os.path.join(out_dir, 'summary.json'), 'w') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    write_manifest(summary['manifest'], os.path.join(out_dir, 'manifest.txt'))


def limits_frame(result: ExperimentResult) -> pd.DataFrame:
    return pd.DataFrame(result.summary['limits'])
