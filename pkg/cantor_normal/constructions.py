"""Named constructions: the exact normal-number schedules, their desk-scale analogues and the Xi presets.

The exact schedule D_t uses, for i >= 6,
    X_i = C_{it, i!},  b_i = v_i = it,  l_i = 3^{i!} (i+1)^{i! i},
    eps_i = 1/i,  k_i = m_i = i,
with l_i = 0 and X_i = (0) below 6. zeta_t = eta(D_t) and R_t = Gamma(D_t).
Its regions are astronomically long, so statistics run on desk-scale
schedules built from a ScheduleProfile while the exact schedule is used
for symbolic checks and random access.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Dict, List, Optional, Sequence
import math
import warnings

import numpy as np
import pandas as pd

from cantor_normal.blocks import admissible_M, type_I_threshold, type_II_threshold
from cantor_normal.constants import AP_I, AP_II, DESK_DIGITS, PLAIN, PRESETS
from cantor_normal.diophantine import Solution, verify_divisibility
from cantor_normal.digits import DigitStream, EtaStream, psi_transform
from cantor_normal.sequences import (BasicSequence, CbwRule, ConstructionSchedule, ExplicitRule, GammaSequence,
                                     LinearSequence, ScheduleTuple, XiSequence, is_infinite_in_limit_prefix)
from cantor_normal.stats import predicted_limit
from cantor_normal.utils import ceil_div, lcm_all

AS_WRITTEN = 'as_written'
SCALED_BY_T = 'scaled_by_t'
L_RULES = (AS_WRITTEN, SCALED_BY_T)
EXACT = 'exact'
DESK = 'desk'
FIRST_REGION = 6


# ---------------------------------------------------------------------------
# Exact schedule


@lru_cache(maxsize=64)
def _region(i: int, t: int, l_rule: str):
    """(w, l, |X|) of region i >= 6."""
    w = math.factorial(i)
    base = (i + 1) * t if l_rule == SCALED_BY_T else i + 1
    return w, 3 ** w * base ** (w * i), w * (i * t) ** w


def thm1_7_parameters(i: int, t: int, l_rule: str = AS_WRITTEN, with_L: bool = True) -> Dict[str, int]:
    """Closed-form parameters of tuple i of D_t, with L_i = sum_{j <= i} l_j |X_j|.

    With l_rule='scaled_by_t' the repetition count is 3^{i!} ((i+1) t)^{i! i}.
    """
    if l_rule not in L_RULES:
        raise ValueError("l_rule must be one of %s" % (L_RULES, ))
    if i < 1 or t < 1:
        raise ValueError("Need i >= 1 and t >= 1.")
    out = {'i': i, 't': t, 'b': max(i * t, 2), 'eps': Fraction(1, i), 'k': i, 'm': i}
    if i < FIRST_REGION:
        out.update({'w': None, 'l': 0, 'X_len': 1, 'L': 0})
        return out
    w, l, X_len = _region(i, t, l_rule)
    out.update({'w': w, 'l': l, 'X_len': X_len})
    if with_L:
        L = 0
        for j in range(FIRST_REGION, i + 1):
            _, lj, Xj = _region(j, t, l_rule)
            L += lj * Xj
        out['L'] = L
    return out


def exact_schedule(t: int, l_rule: str = AS_WRITTEN) -> ConstructionSchedule:
    """D_t as a closed-form schedule; blocks are CbwRule for random access."""
    if t < 1:
        raise ValueError("t must be >= 1.")

    def tuple_at(i):
        p = thm1_7_parameters(i, t, l_rule, with_L=False)
        if i < FIRST_REGION:
            block = ExplicitRule((0, ))
        else:
            block = CbwRule(i * t, p['w'])
        return ScheduleTuple(p['l'], p['b'], p['b'], p['eps'], p['k'], p['m'], block)

    descriptor = 'preset=thm1_7;t=%d' % t
    if l_rule != AS_WRITTEN:
        descriptor += ';l=%s' % l_rule
    return ConstructionSchedule(tuple_fn=tuple_at, descriptor=descriptor)


# ---------------------------------------------------------------------------
# Good conditions


class ExactRatio(object):
    """num / den kept unreduced; comparisons cross-multiply, so multi-million-bit terms stay cheap."""
    __slots__ = ('num', 'den')

    def __init__(self, num: int, den: int):
        if den <= 0:
            raise ValueError("Denominator must be positive.")
        self.num = num
        self.den = den

    def __lt__(self, other):
        return self.num * other.den < other.num * self.den

    def __eq__(self, other):
        return self.num * other.den == other.num * self.den

    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    @property
    def log2(self) -> float:
        if self.num == 0:
            return -math.inf
        return math.log2(self.num) - math.log2(self.den)

    def __repr__(self):
        return 'ExactRatio(2^%.3f)' % self.log2


def trend(values: Sequence[ExactRatio]) -> str:
    values = [v for v in values if v is not None]
    if len(values) < 2:
        return 'undetermined'
    if all(b < a for a, b in zip(values, values[1:])):
        return 'decreasing'
    if all(a == b for a, b in zip(values, values[1:])):
        return 'constant'
    return 'not decreasing'


@dataclass
class GoodReport:
    """The three good-condition ratios per index, and their trends.

    r1_i = b_i^k / ((eps_{i-1} - eps_i) |X_i|)
    r2_i = (l_{i-1} |X_{i-1}|) / (l_i |X_i|) * i * b_i^k
    r3_i = |X_{i+1}| / (l_i |X_i|) * b_i^k
    A ratio is undefined (None) when a repetition count it divides by, or
    the preceding region, is empty.
    """
    frame: pd.DataFrame
    ratios: Dict[str, List[Optional[ExactRatio]]]
    k: int
    m: int

    @property
    def verdicts(self) -> Dict[str, str]:
        return {name: trend(values) for name, values in self.ratios.items()}

    @property
    def passed(self) -> bool:
        return all(v == 'decreasing' for v in self.verdicts.values())


def _log2_or_nan(ratio):
    return np.nan if ratio is None else ratio.log2


def check_good_conditions(schedule: ConstructionSchedule, k: int, m: int = 1, start: int = 2,
                          stop: int = None) -> GoodReport:
    """Good-condition ratios for i in [start, stop], computed in exact integer arithmetic."""
    if stop is None:
        if not schedule.finite:
            raise ValueError("Give stop for closed-form schedules.")
        stop = len(schedule) - 1
    if start < 2 or stop < start:
        raise ValueError("Need 2 <= start <= stop.")
    if not schedule.has_tuple(stop + 1):
        raise ValueError("Tuple %d is needed for r3 at i=%d but the schedule ends earlier." % (stop + 1, stop))
    rows = []
    ratios = {'r1': [], 'r2': [], 'r3': []}
    for i in range(start, stop + 1):
        prev, cur, nxt = schedule.tuple_at(i - 1), schedule.tuple_at(i), schedule.tuple_at(i + 1)
        X_prev, X_cur, X_next = prev.block.length, cur.block.length, nxt.block.length
        bk = cur.b ** k
        gap = prev.eps - cur.eps
        r1 = ExactRatio(bk * gap.denominator, gap.numerator * X_cur) if gap > 0 else None
        r2 = ExactRatio(prev.l * X_prev * i * bk, cur.l * X_cur) if prev.l > 0 and cur.l > 0 else None
        r3 = ExactRatio(X_next * bk, cur.l * X_cur) if cur.l > 0 else None
        for name, value in zip(['r1', 'r2', 'r3'], [r1, r2, r3]):
            ratios[name].append(value)
        w = getattr(cur.block, 'w', None)
        row = {'i': i, 'b': cur.b, 'w': w, 'log2_l': math.log2(cur.l) if cur.l > 0 else -math.inf,
               'log2_X': math.log2(X_cur), 'eps': str(cur.eps),
               'log2_r1': _log2_or_nan(r1), 'log2_r2': _log2_or_nan(r2), 'log2_r3': _log2_or_nan(r3)}
        if w is not None and admissible_M(w, [cur.m]):
            row['threshold_I'] = float(type_I_threshold(cur.k, cur.m, w))
            row['threshold_II'] = float(type_II_threshold(cur.k, cur.m, w))
            row['eps_certified'] = bool(cur.eps >= type_I_threshold(cur.k, cur.m, w)
                                        and cur.eps >= type_II_threshold(cur.k, cur.m, w) and cur.k < w)
        else:
            row['threshold_I'] = np.nan
            row['threshold_II'] = np.nan
            row['eps_certified'] = False
        rows.append(row)
    return GoodReport(pd.DataFrame(rows), ratios, k, m)


# ---------------------------------------------------------------------------
# Desk-scale schedules


@dataclass
class ScheduleProfile:
    """Per-region bases, C_{b,w} widths and repetition counts; eps, k and m default to 1/i, 2, 2."""
    bases: List[int]
    widths: List[int]
    reps: List[int]
    eps: List[Fraction] = None
    ks: List[int] = None
    ms: List[int] = None
    name: str = 'custom'

    def __post_init__(self):
        n = len(self.bases)
        if len(self.widths) != n or len(self.reps) != n:
            raise ValueError("bases, widths and reps must have the same length.")
        if self.eps is None:
            self.eps = [Fraction(1, i) for i in range(1, n + 1)]
        if self.ks is None:
            self.ks = [min(i, 2) for i in range(1, n + 1)]
        if self.ms is None:
            self.ms = list(self.ks)

    def tuples(self) -> List[ScheduleTuple]:
        return [ScheduleTuple(l, b, b, Fraction(e), k, m, CbwRule(b, w))
                for b, w, l, e, k, m in zip(self.bases, self.widths, self.reps, self.eps, self.ks, self.ms)]

    def descriptor(self) -> str:
        lists = [self.bases, self.widths, self.reps, self.ks, self.ms]
        return 'profile=%s;b=%s;w=%s;l=%s;k=%s;m=%s' % ((self.name, ) + tuple(','.join(map(str, v)) for v in lists))


def _grown_reps(sizes: List[int], growth: int) -> List[int]:
    """l_1 = 1 and l_i = max(l_{i-1}, round(growth * l_{i-1} |X_{i-1}| / |X_i|))."""
    reps = []
    prev = None
    for size in sizes:
        reps.append(1 if prev is None else max(reps[-1], round(growth * prev / size)))
        prev = reps[-1] * size
    return reps


def default_profile(n_regions: int = 9, growth: int = 6) -> ScheduleProfile:
    """b_i = i + 1, w_i = 2 then 4, and l_i chosen so that l_i |X_i| is about growth * l_{i-1} |X_{i-1}|.

    With the defaults the first eight regions total under 10^8 digits.
    """
    bases = [i + 1 for i in range(1, n_regions + 1)]
    widths = [2 if i <= 2 else 4 for i in range(1, n_regions + 1)]
    reps = _grown_reps([w * b ** w for b, w in zip(bases, widths)], growth)
    return ScheduleProfile(bases, widths, reps, name='default')


def desk_profile(name: str, **params) -> ScheduleProfile:
    """Profiles for the Xi presets whose bases are multiples of every alpha_j and at least 2 max c_j.

    Every profile but the default one covers at least DESK_DIGITS digits.
    """
    if name in ('thm1_7', 'thm1_15'):
        return default_profile()
    if name == 'thm1_10':
        t = params.get('t', 3)
        b = 2 * math.factorial(t)
        w = max(4, t)
        return ScheduleProfile([b], [w], [max(1, ceil_div(DESK_DIGITS, w * b ** w))], ks=[t], ms=[1],
                               name='thm1_10')
    if name == 'thm1_11':
        k = params.get('k', 2)
        return ScheduleProfile([4 * k, 6 * k, 8 * k], [4, 4, 4], [3, 5, 5], ks=[k] * 3, ms=[k] * 3,
                               name='thm1_11')
    if name == 'thm1_13':
        c = [Fraction(cj) for cj in params.get('c', (2, 1, 2))]
        step = lcm_all([cj.numerator for cj in c])
        first = step * ceil_div(max(4, math.ceil(2 * max(c))), step)
        bases = [first]
        while True:
            sizes = [4 * b ** 4 for b in bases]
            reps = _grown_reps(sizes, 6)
            if sum(l * s for l, s in zip(reps, sizes)) >= DESK_DIGITS:
                break
            bases.append(bases[-1] + step)
        n = len(bases)
        return ScheduleProfile(bases, [4] * n, reps, ks=[len(c)] * n, ms=[1] * n, name='thm1_13')
    raise ValueError("No desk profile for %r." % name)


@dataclass
class ScaledSchedule:
    profile: ScheduleProfile
    schedule: ConstructionSchedule
    report: Optional[GoodReport]


def scaled_schedule(profile: ScheduleProfile = None, k: int = 2, strict: bool = False) -> ScaledSchedule:
    """Build a desk-scale schedule and its good-condition report.

    Non-monotone tuples are always rejected. With strict=True a profile is
    also rejected unless every good-condition ratio decreases.
    """
    profile = profile or default_profile()
    schedule = ConstructionSchedule(profile.tuples(), descriptor=profile.descriptor())
    report = None
    if len(schedule) >= 3:
        report = check_good_conditions(schedule, k, start=2, stop=len(schedule) - 1)
        if strict and not report.passed:
            raise ValueError("Profile %s fails the good conditions: %s" % (profile.name, report.verdicts))
    return ScaledSchedule(profile, schedule, report)


# ---------------------------------------------------------------------------
# Presets


@dataclass
class Preset:
    name: str
    params: Dict[str, object]
    scale: str
    schedule: ConstructionSchedule
    R: GammaSequence
    zeta: EtaStream
    Q: BasicSequence
    x: DigitStream
    c: Optional[List[Fraction]] = None
    d: Optional[int] = None
    predicted: pd.DataFrame = None
    notes: List[str] = field(default_factory=list)

    @property
    def descriptor(self) -> str:
        items = ';'.join('%s=%s' % (key, _param_str(self.params[key])) for key in sorted(self.params))
        out = 'preset:%s;scale=%s' % (self.name, self.scale)
        return out + (';' + items if items else '')

    def limit(self, mode: str, k: int, m: int = 1, r: int = 0) -> Fraction:
        df = self.predicted
        row = df[(df['mode'] == mode) & (df['k'] == k) & (df['m'] == m) & (df['r'] == r)]
        if len(row) == 0:
            raise KeyError((mode, k, m, r))
        return Fraction(row['limit'].iloc[0])


def _param_str(value):
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value)
    if isinstance(value, BasicSequence):
        return '[%s]' % value.descriptor
    return str(value)


def predicted_table(c: Sequence = None, d: int = None, max_k: int = 2, ms: Sequence[int] = (1, 2)) -> pd.DataFrame:
    """Predicted limits for every (mode, k, m, r) with a nonempty sum; all ones when c is None."""
    rows = []
    for k in range(1, max_k + 1):
        keys = [(PLAIN, k, 1, 0)]
        for m in ms:
            for r in range(m):
                keys.append((AP_I, k, m, r))
                keys.append((AP_II, k, m, r))
        for mode, kk, m, r in keys:
            if c is None:
                limit = Fraction(1)
            else:
                try:
                    limit = predicted_limit(c, d, len(c), kk, mode, m, r)
                except ValueError:
                    continue
            rows.append({'mode': mode, 'k': kk, 'm': m, 'r': r, 'limit': str(limit), 'limit_float': float(limit)})
    return pd.DataFrame(rows, columns=['mode', 'k', 'm', 'r', 'limit', 'limit_float'])


def thm1_11_coefficients(k: int) -> List[Fraction]:
    """t = 2k^2; c_j = 2k on [0, k-1] and on [k^2, k^2 + k - 1], 1 elsewhere."""
    t = 2 * k * k
    c = [Fraction(1)] * t
    for j in list(range(k)) + list(range(k * k, k * k + k)):
        c[j] = Fraction(2 * k)
    return c


def _schedule_for(name, t, scale, params, l_rule):
    if scale == EXACT:
        return exact_schedule(t, l_rule)
    if scale == DESK:
        return scaled_schedule(desk_profile(name, **params)).schedule
    raise ValueError("scale must be 'exact' or 'desk'.")


def _xi_preset(name, params, scale, t, c, d, l_rule, max_k, ms, notes):
    schedule = _schedule_for(name, t, scale, params, l_rule)
    R = GammaSequence(schedule)
    zeta = EtaStream(schedule)
    Q = XiSequence(R, c, d)
    x = psi_transform(zeta, R, Q)
    sol = Solution(c, d)
    if scale == DESK:
        bad = verify_divisibility(sol, schedule, len(schedule))
    else:
        bad = verify_divisibility(sol, schedule, FIRST_REGION + 2)
        bad = [b for b in bad if b[1] >= FIRST_REGION]
    if bad:
        notes.append('alpha_j does not divide b_i for (j, i, b_i) in %s; Xi terms there are not integers'
                     % bad[:5])
    predicted = predicted_table(c, d, max_k, ms)
    return Preset(name, params, scale, schedule, R, zeta, Q, x, list(c), d, predicted, notes)


def preset(name: str, params: Dict[str, object] = None, scale: str = EXACT, l_rule: str = AS_WRITTEN) -> Preset:
    """Wire a named construction.

    thm1_7(t): zeta_t and R_t. thm1_10(t): Xi(R_t, (t!, 1, ..., 1), t!).
    thm1_11(k): Xi(R_{2k^2}, c, 2k^2(k+1)). thm1_13(c, d): Xi over R_s
    with s the lcm of the numerators of c. thm1_15(Q): psi_{R_1,Q}(zeta_1).
    With scale='desk' the exact D_t is replaced by a desk profile.
    """
    if name not in PRESETS:
        raise ValueError("Unknown preset %r; choose from %s" % (name, PRESETS))
    params = dict(params or {})
    if l_rule != AS_WRITTEN:
        params['l'] = l_rule
    notes = []
    if name == 'thm1_7':
        t = int(params.setdefault('t', 2))
        if t < 2:
            raise ValueError("thm1_7 needs t >= 2 (use thm1_15 for t = 1).")
        schedule = _schedule_for(name, t, scale, params, l_rule)
        R = GammaSequence(schedule)
        zeta = EtaStream(schedule)
        return Preset(name, params, scale, schedule, R, zeta, R, zeta, predicted=predicted_table(),
                      notes=notes)
    if name == 'thm1_10':
        t = int(params.setdefault('t', 3))
        if t < 2:
            raise ValueError("thm1_10 needs t >= 2.")
        if t == 2:
            if not params.get('allow_degenerate'):
                raise ValueError("thm1_10 at t = 2 has d = t!, which equals t; pass allow_degenerate=True.")
            warnings.warn("thm1_10 at t = 2: d = t leaves no 2^n residues, outside d >= t + 1.")
            notes.append('d = t: no 2^n residue classes')
        c = [Fraction(math.factorial(t))] + [Fraction(1)] * (t - 1)
        return _xi_preset(name, params, scale, t, c, math.factorial(t), l_rule, t, (1, 2), notes)
    if name == 'thm1_11':
        k = int(params.setdefault('k', 2))
        if k < 2:
            raise ValueError("thm1_11 needs k >= 2.")
        t = 2 * k * k
        return _xi_preset(name, params, scale, t, thm1_11_coefficients(k), 2 * k * k * (k + 1), l_rule, k,
                          (k, ), notes)
    if name == 'thm1_13':
        c = [Fraction(cj) for cj in params.setdefault('c', (2, 1, 2))]
        d = int(params.setdefault('d', 4))
        if d < len(c) + 1:
            raise ValueError("thm1_13 needs d >= t + 1.")
        s = max(2, lcm_all([cj.numerator for cj in c]))
        return _xi_preset(name, params, scale, s, c, d, l_rule, len(c), (1, 2), notes)
    # thm1_15
    Q = params.setdefault('Q', LinearSequence(2, 1))
    if not isinstance(Q, BasicSequence):
        raise TypeError("thm1_15 takes Q as a BasicSequence.")
    if not is_infinite_in_limit_prefix(Q, 4096):
        warnings.warn("%s does not look infinite in limit on its first 4096 terms." % Q.descriptor)
        notes.append('Q not infinite in limit on the checked prefix')
    schedule = _schedule_for(name, 1, scale, params, l_rule)
    R = GammaSequence(schedule)
    zeta = EtaStream(schedule)
    x = psi_transform(zeta, R, Q)
    return Preset(name, params, scale, schedule, R, zeta, Q, x,
                  predicted=pd.DataFrame(columns=['mode', 'k', 'm', 'r', 'limit', 'limit_float']), notes=notes)
