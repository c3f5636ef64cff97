"""Streaming block counts against their divergence sums.

Three counting modes are supported:

* plain: N_n(B, x), windows inside the first n digits;
* apI: N_{n,m,r}(B, x), windows starting at positions p = r (mod m);
* apII: plain counting of the extracted expansion Upsilon_{Q,A_{m,r}}(x)
  w.r.t. Lambda_{A_{m,r}}(Q). In this mode n counts extracted digits.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Dict, List, Sequence
import json
import warnings

import numpy as np
import pandas as pd
from tqdm import tqdm

from cantor_normal.blocks import Block, as_array
from cantor_normal.constants import (AP_I, AP_II, COUNT_LIMIT, MIN_DENOMINATOR, MODES, PLAIN, SERIES_COLUMNS,
                                     TYPE_I, TYPE_II, VERSION)
from cantor_normal.diophantine import ap_product_sum, consecutive_product_sum
from cantor_normal.digits import DigitRangeError, DigitStream, EtaStream, UpsilonStream, psi_transform
from cantor_normal.samplers import ChunkSampler
from cantor_normal.sequences import ArithmeticProgression, BasicSequence, LambdaSequence, divergence_probe
from cantor_normal.utils import geometric_checkpoints

CHUNK = 2 ** 16


def _hits(buf, first_pos, B, m, r, lo, hi):
    """1-based starts p in [lo, hi], p = r (mod m), where B occurs in buf (buf[0] is position first_pos)."""
    k = len(B)
    lo = max(lo, first_pos)
    hi = min(hi, first_pos + len(buf) - k)
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    p0 = lo + (r - lo) % m
    if p0 > hi:
        return np.zeros(0, dtype=np.int64)
    starts = np.arange(p0 - first_pos, hi - first_pos + 1, m, dtype=np.int64)
    hit = np.ones(len(starts), dtype=bool)
    for j, digit in enumerate(B):
        hit &= np.asarray(buf[starts + j] == digit, dtype=bool)
    return starts[hit] + first_pos


def _validated(digits, Q, first_pos):
    for j, e in enumerate(digits, first_pos):
        if not Q.accepts(j, e):
            raise DigitRangeError("E_%d = %d is outside [0, q_%d - 1] for %s" % (j, e, j, Q.descriptor))
    return as_array(digits)


@dataclass
class CounterState:
    """Running counts of the target blocks; `tail` keeps the last (max |B| - 1) digits."""
    mode: str
    m: int
    r: int
    blocks: List[Block]
    counts: Dict[str, int] = field(default_factory=dict)
    n: int = 0
    tail: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        for B in self.blocks:
            self.counts.setdefault(str(B), 0)

    @property
    def residue(self):
        # type II counts the extracted expansion with no further residue filter
        if self.mode == AP_I:
            return self.m, self.r
        return 1, 0

    def feed(self, digits: np.ndarray):
        m, r = self.residue
        buf = np.concatenate([self.tail, digits]) if len(self.tail) else digits
        first_pos = self.n - len(self.tail) + 1
        new_n = self.n + len(digits)
        for B in self.blocks:
            k = len(B)
            hits = _hits(buf, first_pos, B.array, m, r, max(1, self.n - k + 2), new_n - k + 1)
            count = self.counts[str(B)] + len(hits)
            if count > COUNT_LIMIT:
                raise OverflowError("Count of %s exceeds 64 bits." % B)
            self.counts[str(B)] = count
        self.n = new_n
        keep = max(len(B) for B in self.blocks) - 1
        self.tail = buf[max(len(buf) - keep, 0):] if keep > 0 else buf[:0]


class RatioSeries(object):
    """Counts, divergence-sum denominators and ratios at checkpoints.

    `frame` has the columns n, mode, m, r, block, count, denominator, ratio;
    ratio is NaN while the denominator is below the pre-asymptotic floor.
    """

    def __init__(self, frame: pd.DataFrame, mode: str, m: int, r: int, adjusted: bool = False,
                 neglected: float = 0.0):
        self.frame = frame
        self.mode = mode
        self.m = m
        self.r = r
        self.adjusted = adjusted
        self.neglected = neglected

    def __len__(self):
        return len(self.frame)

    def block(self, B) -> pd.DataFrame:
        return self.frame[self.frame['block'] == str(Block(B))]

    def final(self, B) -> pd.Series:
        return self.block(B).iloc[-1]

    def to_csv(self, fpath):
        self.frame.to_csv(fpath, index=False)

    def to_json(self, fpath, manifest: Dict[str, str] = None):
        out = {'manifest': dict(manifest or {}), 'version': VERSION, 'adjusted': self.adjusted,
               'neglected': self.neglected, 'series': json.loads(self.frame.to_json(orient='records'))}
        with open(fpath, 'w') as f:
            json.dump(out, f, indent=2, sort_keys=True)


def _source(x, Q, mode, m, r):
    if mode == AP_II:
        M = ArithmeticProgression(m, r)
        return UpsilonStream(x, M), LambdaSequence(Q, M)
    return x, Q


def _checkpoints(x, mode, horizon, checkpoints):
    extra = []
    if isinstance(x, EtaStream) and mode != AP_II:
        i = 1
        while x.schedule.has_tuple(i) and x.schedule.L(i) <= horizon:
            extra.append(x.schedule.L(i))
            i += 1
    if checkpoints is None:
        return geometric_checkpoints(horizon, extra=extra)
    return sorted(set(int(c) for c in list(checkpoints) + extra if 1 <= c <= horizon))


def _denominators(Q, mode, m, r, ks, horizon, checkpoints):
    variant = TYPE_II if mode == AP_II else TYPE_I
    mm, rr = (1, 0) if mode == PLAIN else (m, r)
    out = {}
    neglected = 0.0
    for k in ks:
        sums = divergence_probe(Q, k, mm, rr, variant, horizon, checkpoints)
        out[k] = dict(zip(sums['n'], sums['partial_sum']))
        if len(sums):
            neglected = max(neglected, float(sums['neglected'].iloc[-1]))
            if sums['truncated'].any():
                first = int(sums.loc[sums['truncated'], 'n'].iloc[0])
                warnings.warn("%s ends before the last window of length %d; denominators from n=%d on stop "
                              "at the last complete window." % (Q.descriptor, k, first))
    return out, neglected


def _check_args(blocks, mode, m, r, horizon):
    if len(blocks) == 0:
        raise ValueError("Give at least one block to count.")
    if mode not in MODES:
        raise ValueError("mode must be one of %s" % (MODES, ))
    if horizon < 1 or horizon > COUNT_LIMIT:
        raise OverflowError("Horizon must lie in [1, 2^63 - 1].")
    if mode == PLAIN:
        m, r = 1, 0
    ArithmeticProgression(m, r)
    blocks = [B if isinstance(B, Block) else Block(B) for B in blocks]
    if any(len(B) == 0 for B in blocks):
        raise ValueError("Cannot count the empty block.")
    # counts are keyed by str(B); repeated blocks are counted once
    unique = {}
    for B in blocks:
        unique.setdefault(str(B), B)
    return list(unique.values()), m, r


def _series(Q, blocks, mode, m, r, horizon, checkpoints, counts, min_denominator):
    denominators, neglected = _denominators(Q, mode, m, r, sorted(set(len(B) for B in blocks)), horizon,
                                            checkpoints)
    rows = []
    for ci, n in enumerate(checkpoints):
        for bi, B in enumerate(blocks):
            denominator = denominators[len(B)][n]
            count = int(counts[bi][ci])
            ratio = count / denominator if denominator >= min_denominator else np.nan
            rows.append([n, mode, m, r, str(B), count, denominator, ratio])
    adjusted = mode == AP_I and r == 0 and m > 1
    if adjusted:
        warnings.warn("r = 0: the j = 0 term of Q_{n,m,0}^{(k)} is skipped (q_0 is undefined).")
    if neglected > 1e-15:
        warnings.warn("Denominator terms below 2^-1000 were dropped (mass <= %.3g)." % neglected)
    return RatioSeries(pd.DataFrame(rows, columns=SERIES_COLUMNS), mode, m, r, adjusted, neglected)


def count_stream(x: DigitStream, Q: BasicSequence, blocks: Sequence, mode: str = PLAIN, m: int = 1, r: int = 0,
                 horizon: int = 10 ** 4, checkpoints=None, min_denominator: float = MIN_DENOMINATOR,
                 progress: bool = False) -> RatioSeries:
    """Count every block in one pass over digits 1..horizon, recording ratios at checkpoints."""
    blocks, m, r = _check_args(blocks, mode, m, r, horizon)
    checkpoints = _checkpoints(x, mode, horizon, checkpoints)
    src, Q_src = _source(x, Q, mode, m, r)
    state = CounterState(mode, m, r, blocks)
    counts = np.zeros((len(blocks), len(checkpoints)), dtype=np.int64)
    cursor = src.cursor()
    pbar = tqdm(total=horizon, disable=not progress)
    for ci, target in enumerate(checkpoints):
        while state.n < target:
            size = min(CHUNK, target - state.n)
            digits = list(islice(cursor, size))
            if len(digits) < size:
                raise IndexError("Stream %s ended at digit %d." % (src.descriptor, state.n + len(digits)))
            state.feed(_validated(digits, Q_src, state.n + 1))
            pbar.update(size)
        for bi, B in enumerate(blocks):
            counts[bi, ci] = state.counts[str(B)]
    pbar.close()
    return _series(Q, blocks, mode, m, r, horizon, checkpoints, counts, min_denominator)


def _count_chunk(src, Q_src, blocks, m, r, chunk, checkpoints):
    start, stop, read_to = chunk
    digits = list(islice(src.cursor(start), read_to - start + 1))
    buf = _validated(digits, Q_src, start)
    out = np.zeros((len(blocks), len(checkpoints)), dtype=np.int64)
    limits = np.asarray(checkpoints, dtype=np.int64)
    for bi, B in enumerate(blocks):
        hits = _hits(buf, start, B.array, m, r, start, stop)
        out[bi] = np.searchsorted(hits, limits - len(B) + 1, side='right')
    return out


def count_stream_parallel(x: DigitStream, Q: BasicSequence, blocks: Sequence, mode: str = PLAIN, m: int = 1,
                          r: int = 0, horizon: int = 10 ** 4, checkpoints=None,
                          min_denominator: float = MIN_DENOMINATOR, num_replicas: int = 4,
                          chunk_size: int = CHUNK, progress: bool = False) -> RatioSeries:
    """Same result as count_stream, computed over overlapping chunks by `num_replicas` workers."""
    blocks, m, r = _check_args(blocks, mode, m, r, horizon)
    checkpoints = _checkpoints(x, mode, horizon, checkpoints)
    src, Q_src = _source(x, Q, mode, m, r)
    mm, rr = (m, r) if mode == AP_I else (1, 0)
    overlap = max(len(B) for B in blocks) - 1

    def work(rank):
        sampler = ChunkSampler(horizon, chunk_size, overlap, num_replicas, rank)
        total = np.zeros((len(blocks), len(checkpoints)), dtype=np.int64)
        for chunk in tqdm(sampler, disable=not progress or rank > 0):
            total += _count_chunk(src, Q_src, blocks, mm, rr, chunk, checkpoints)
        return total

    with ThreadPoolExecutor(max_workers=num_replicas) as pool:
        parts = list(pool.map(work, range(num_replicas)))
    counts = np.sum(parts, axis=0)
    return _series(Q, blocks, mode, m, r, horizon, checkpoints, counts, min_denominator)


def predicted_limit(c: Sequence, d: int, t: int = None, k: int = 1, mode: str = PLAIN, m: int = 1,
                    r: int = 0) -> Fraction:
    """Limit of count / divergence sum for psi(x) built over Xi(P, c, d).

    plain: d / sum_{j=0}^{t-k} c_j ... c_{j+k-1}
    apI:   (d/m) / sum_{j=0}^{floor((t-k-r)/m)} c_{r+jm} ... c_{r+jm+k-1}
    apII:  (d/m) / sum_{j=0}^{floor((t-r-1)/m)-k+1} c_{r+jm} c_{r+(j+1)m} ... c_{r+(j+k-1)m}

    A limit of 1 means the expansion is normal in that sense.
    """
    t = len(c) if t is None else t
    if t != len(c):
        raise ValueError("t=%d but %d coefficients were given." % (t, len(c)))
    if mode not in MODES:
        raise ValueError("mode must be one of %s" % (MODES, ))
    if mode == PLAIN:
        return Fraction(d) / consecutive_product_sum(c, k)
    variant = TYPE_I if mode == AP_I else TYPE_II
    return Fraction(d, m) / ap_product_sum(c, k, m, r, variant)


def ratio_normality_series(x: DigitStream, Q: BasicSequence, B1, B2, horizon: int = 10 ** 4, checkpoints=None,
                           mode: str = PLAIN, m: int = 1, r: int = 0) -> pd.DataFrame:
    """N(B1) / N(B2) at checkpoints; `defined` is False where N(B2) = 0."""
    B1, B2 = Block(B1), Block(B2)
    if len(B1) != len(B2):
        raise ValueError("Ratio normality compares blocks of equal length (%d != %d)." % (len(B1), len(B2)))
    series = count_stream(x, Q, [B1, B2], mode, m, r, horizon, checkpoints)
    c1 = series.block(B1).reset_index(drop=True)
    c2 = series.block(B2).reset_index(drop=True)
    df = pd.DataFrame({'n': c1['n'], 'count_1': c1['count'], 'count_2': c2['count']})
    df['defined'] = df['count_2'] > 0
    df['ratio'] = np.where(df['defined'], df['count_1'] / df['count_2'].where(df['defined'], 1), np.nan)
    return df


@dataclass
class DiscrepancyResult:
    discrepancy: float
    truncation_bound: float
    n: int


def star_discrepancy(points) -> float:
    u = np.sort(np.asarray(points, dtype=float))
    n = len(u)
    if n == 0:
        raise ValueError("No points.")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def distribution_discrepancy(x: DigitStream, Q: BasicSequence, n: int, tail_digits: int = 16) -> DiscrepancyResult:
    """Star discrepancy of T_{Q,j}(x) = 0.E_{j+1} E_{j+2} ... w.r.t. the shifted Q, for j = 1..n.

    Each point is truncated to `tail_digits` digits; the returned bound is
    the largest truncation error max_j 1 / (q_{j+1} ... q_{j+tail_digits}).
    """
    if tail_digits < 1:
        raise ValueError("tail_digits must be >= 1.")
    total = n + tail_digits
    digits = np.array([float(e) for e in islice(x.cursor(), total)])
    if len(digits) < total:
        raise IndexError("Stream ended before %d digits." % total)
    qs = np.array([Q.float_at(j) for j in range(1, total + 1)])
    points = np.zeros(n)
    scale = np.ones(n)
    for i in range(1, tail_digits + 1):
        scale = scale * qs[i:i + n]
        points += digits[i:i + n] / scale
    bound = float(np.max(1.0 / scale))
    return DiscrepancyResult(star_discrepancy(points), bound, n)


@dataclass
class DriftReport:
    """N_n(B, psi(x)) - N_n(B, x): the frame holds checkpoints, last_change the final n where it moved."""
    frame: pd.DataFrame
    last_change: int
    max_abs_drift: int


def psi_count_drift(x: DigitStream, P: BasicSequence, Q: BasicSequence, B, horizon: int = 10 ** 4,
                    checkpoints=None) -> DriftReport:
    B = Block(B)
    k = len(B)
    y = psi_transform(x, P, Q)
    checkpoints = geometric_checkpoints(horizon) if checkpoints is None else sorted(checkpoints)
    hits_x, hits_y = [], []
    sampler = ChunkSampler(horizon, CHUNK, k - 1)
    for start, stop, read_to in sampler:
        n_read = read_to - start + 1
        dx = _validated(list(islice(x.cursor(start), n_read)), P, start)
        dy = as_array(list(islice(y.cursor(start), n_read)))
        hits_x.append(_hits(dx, start, B.array, 1, 0, start, stop))
        hits_y.append(_hits(dy, start, B.array, 1, 0, start, stop))
    hx = np.concatenate(hits_x) if hits_x else np.zeros(0, dtype=np.int64)
    hy = np.concatenate(hits_y) if hits_y else np.zeros(0, dtype=np.int64)
    only_y = np.setdiff1d(hy, hx)
    only_x = np.setdiff1d(hx, hy)
    ends = np.concatenate([only_y, only_x]) + k - 1
    steps = np.concatenate([np.ones(len(only_y), dtype=np.int64), -np.ones(len(only_x), dtype=np.int64)])
    order = np.argsort(ends, kind='stable')
    drift_path = np.cumsum(steps[order])
    last_change = int(ends.max()) if len(ends) else 0
    max_abs = int(np.abs(drift_path).max()) if len(drift_path) else 0
    limits = np.asarray(checkpoints, dtype=np.int64) - k + 1
    count_x = np.searchsorted(hx, limits, side='right')
    count_y = np.searchsorted(hy, limits, side='right')
    frame = pd.DataFrame({'n': checkpoints, 'count_x': count_x, 'count_psi': count_y, 'drift': count_y - count_x})
    return DriftReport(frame, last_change, max_abs)


def trend_summary(series: pd.DataFrame, window: int = 5) -> pd.DataFrame:
    """Per (mode, m, r, block): final ratio, mean and least-squares slope (against log n) over the last rows.

    Only checkpoints with a defined ratio are used.
    """
    rows = []
    for (mode, m, r, block), df in series.dropna(subset=['ratio']).groupby(['mode', 'm', 'r', 'block'], sort=False):
        tail = df.sort_values('n').tail(window)
        if len(tail) >= 2:
            slope = float(np.polyfit(np.log(tail['n'].astype(float)), tail['ratio'].astype(float), 1)[0])
        else:
            slope = np.nan
        rows.append({'mode': mode, 'm': m, 'r': r, 'block': block, 'final_n': int(tail['n'].iloc[-1]),
                     'final_ratio': float(tail['ratio'].iloc[-1]), 'final_mean': float(tail['ratio'].mean()),
                     'slope': slope})
    return pd.DataFrame(rows, columns=['mode', 'm', 'r', 'block', 'final_n', 'final_ratio', 'final_mean', 'slope'])
