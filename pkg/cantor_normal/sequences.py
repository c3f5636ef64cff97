"""Basic sequences Q = (q_n), n >= 1, and the divergence sums built on them."""
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, List, Optional, Sequence
import math
import threading

import pandas as pd

from cantor_normal.blocks import Block, UniformMeasure, cbw_digit_at, cbw_length, iter_cbw
from cantor_normal.constants import TYPE_I, VARIANTS, UNDERFLOW_BITS
from cantor_normal.utils import CompensatedSum, geometric_checkpoints

_NEGLECT_BOUND = 2.0 ** -UNDERFLOW_BITS


class InvalidSequenceError(ValueError):
    """q_n < 2, or a Xi term that is not an integer."""


# ---------------------------------------------------------------------------
# Index streams


class IndexStream(object):
    """A strictly increasing stream of positive integers m_1 < m_2 < ..."""
    descriptor = 'm=1;r=0'

    def at(self, t: int) -> int:
        return t

    def __iter__(self) -> Iterator[int]:
        t = 1
        while True:
            yield self.at(t)
            t += 1

    def count_upto(self, n: int) -> int:
        """Number of indices m_t <= n."""
        return max(n, 0)


class ArithmeticProgression(IndexStream):
    """Positions p >= 1 with p = r (mod m); when r = 0 the index 0 is dropped."""

    def __init__(self, m: int, r: int):
        if m < 1:
            raise ValueError("m must be >= 1.")
        if not 0 <= r < m:
            raise ValueError("r must lie in [0, m-1].")
        self.m = m
        self.r = r
        self.first = r if r > 0 else m
        self.descriptor = 'm=%d;r=%d' % (m, r)

    def at(self, t: int) -> int:
        if t < 1:
            raise IndexError(t)
        return self.first + (t - 1) * self.m

    def count_upto(self, n: int) -> int:
        if n < self.first:
            return 0
        return (n - self.first) // self.m + 1

    def __eq__(self, other):
        return isinstance(other, ArithmeticProgression) and (self.m, self.r) == (other.m, other.r)

    def __hash__(self):
        return hash((self.m, self.r))


class ExplicitIndices(IndexStream):

    def __init__(self, indices: Iterable[int]):
        indices = [int(i) for i in indices]
        if len(indices) == 0 or indices[0] < 1:
            raise ValueError("Index streams start at a positive integer.")
        for a, b in zip(indices, indices[1:]):
            if b <= a:
                raise ValueError("Index stream must be strictly increasing (%d then %d)." % (a, b))
        self.indices = indices
        self.descriptor = 'indices=' + ','.join(str(i) for i in indices)

    def at(self, t: int) -> int:
        if not 1 <= t <= len(self.indices):
            raise IndexError("Index stream has %d entries, asked for %d." % (len(self.indices), t))
        return self.indices[t - 1]

    def __iter__(self):
        return iter(self.indices)

    def count_upto(self, n: int) -> int:
        return bisect_left(self.indices, n + 1)


# ---------------------------------------------------------------------------
# Basic sequences


class BasicSequence(object):
    """q_n >= 2 for every n >= 1. Subclasses implement `_compute`."""
    descriptor = None

    def _compute(self, n: int) -> int:
        raise NotImplementedError

    def q_at(self, n: int) -> int:
        if n < 1:
            raise IndexError("Basic sequences are indexed from 1, got %d." % n)
        q = self._compute(n)
        if q < 2:
            raise InvalidSequenceError("q_%d = %d < 2 in %s" % (n, q, self.descriptor))
        return q

    def __getitem__(self, n: int) -> int:
        return self.q_at(n)

    def prefix(self, n: int) -> List[int]:
        return [self.q_at(j) for j in range(1, n + 1)]

    def __iter__(self) -> Iterator[int]:
        n = 1
        while True:
            yield self.q_at(n)
            n += 1

    def float_at(self, n: int) -> float:
        """q_n as a double, or inf when q_n has more than UNDERFLOW_BITS bits."""
        q = self.q_at(n)
        if q.bit_length() > UNDERFLOW_BITS:
            return math.inf
        return float(q)

    def capped_digit(self, n: int, e: int) -> int:
        """min(e, q_n - 1)."""
        return min(e, self.q_at(n) - 1)

    def accepts(self, n: int, e: int) -> bool:
        return e >= 0 and self.capped_digit(n, e) == e

    @property
    def period(self) -> Optional[int]:
        """A period of the sequence when one is known, else None."""
        return None

    @property
    def length(self) -> Optional[int]:
        """Number of terms of a finite sequence; None when the sequence is infinite or not known to end."""
        return None

    def __repr__(self):
        return '%s(%s)' % (type(self).__name__, self.descriptor)


class ConstantSequence(BasicSequence):

    def __init__(self, b: int):
        if b < 2:
            raise InvalidSequenceError("Constant basic sequence needs b >= 2, got %d." % b)
        self.b = b
        self.descriptor = 'constant:%d' % b

    def _compute(self, n):
        return self.b

    @property
    def period(self):
        return 1


class ExplicitSequence(BasicSequence):
    """A finite list of q's, optionally repeated forever."""

    def __init__(self, values: Sequence[int], periodic: bool = False):
        values = [int(v) for v in values]
        if len(values) == 0:
            raise ValueError("Explicit sequences need at least one value.")
        for i, v in enumerate(values):
            if v < 2:
                raise InvalidSequenceError("q_%d = %d < 2 in explicit sequence." % (i + 1, v))
        self.values = values
        self.periodic = periodic
        self.descriptor = 'explicit:' + ','.join(str(v) for v in values) + (';periodic=1' if periodic else '')

    def _compute(self, n):
        if self.periodic:
            return self.values[(n - 1) % len(self.values)]
        if n > len(self.values):
            raise IndexError("Explicit sequence has %d terms, asked for q_%d." % (len(self.values), n))
        return self.values[n - 1]

    @property
    def period(self):
        return len(self.values) if self.periodic else None

    @property
    def length(self):
        return None if self.periodic else len(self.values)


class LinearSequence(BasicSequence):
    """q_n = start + (n - 1) // step, infinite in limit."""

    def __init__(self, start: int = 2, step: int = 1):
        if start < 2 or step < 1:
            raise InvalidSequenceError("Linear sequences need start >= 2 and step >= 1.")
        self.start = start
        self.step = step
        self.descriptor = 'linear:start=%d;step=%d' % (start, step)

    def _compute(self, n):
        return self.start + (n - 1) // self.step


class StreamSequence(BasicSequence):
    """A sequence produced by an iterator; the prefix is memoized in chunks.

    Extension happens under a lock, so concurrent readers never observe a
    partially filled cache.
    """

    def __init__(self, factory: Callable[[], Iterator[int]], descriptor: str, chunk: int = 4096):
        self._factory = factory
        self._iterator = None
        self._cache = []
        self._lock = threading.Lock()
        self.chunk = chunk
        self.descriptor = descriptor

    def _fill(self, n):
        with self._lock:
            if self._iterator is None:
                self._iterator = self._factory()
            target = max(n, len(self._cache) + self.chunk)
            while len(self._cache) < target:
                try:
                    self._cache.append(int(next(self._iterator)))
                except StopIteration:
                    break

    def _compute(self, n):
        if n > len(self._cache):
            self._fill(n)
            if n > len(self._cache):
                raise IndexError("Stream sequence %s ended before q_%d." % (self.descriptor, n))
        return self._cache[n - 1]


class XiSequence(BasicSequence):
    """Residue-class rescaling of P.

    xi_n = max(2, p_n / c_j) when n = j (mod d) for j < t, and 2^n p_n otherwise.

    d = t is accepted: every residue class is then rescaled and no 2^n terms
    occur. The constructions themselves need d >= t + 1 and check it.
    """

    def __init__(self, P: BasicSequence, c: Sequence, d: int):
        c = [Fraction(cj) for cj in c]
        t = len(c)
        if t < 1:
            raise ValueError("Xi needs at least one coefficient.")
        if any(cj <= 0 for cj in c):
            raise ValueError("Xi coefficients must be positive.")
        if d < t:
            raise ValueError("Xi needs d >= t (got d=%d, t=%d)." % (d, t))
        self.P = P
        self.c = c
        self.d = d
        self.t = t
        self.descriptor = 'xi:base=[%s];c=%s;d=%d' % (P.descriptor, ','.join(str(cj) for cj in c), d)

    def reduced(self, n: int) -> bool:
        return n % self.d < self.t

    def _compute(self, n):
        p = self.P.q_at(n)
        j = n % self.d
        if j >= self.t:
            return (p << n)
        value = Fraction(p) / self.c[j]
        if value.denominator != 1:
            raise InvalidSequenceError("xi_%d = %d / %s is not an integer (numerator of c_%d must divide p_n)."
                                       % (n, p, self.c[j], j))
        return max(2, value.numerator)

    def float_at(self, n):
        if self.reduced(n):
            return float(self.q_at(n))
        p = self.P.q_at(n)
        if n + p.bit_length() > UNDERFLOW_BITS:
            return math.inf
        return math.ldexp(float(p), n)

    def capped_digit(self, n, e):
        if not self.reduced(n) and e.bit_length() <= n:
            # e < 2^n <= 2^n p_n - 1
            return e
        return min(e, self.q_at(n) - 1)

    @property
    def period(self):
        return None

    @property
    def length(self):
        return self.P.length


class LambdaSequence(BasicSequence):
    """Lambda_M(Q) = (q_{m_t})."""

    def __init__(self, Q: BasicSequence, M: IndexStream):
        self.Q = Q
        self.M = M
        self.descriptor = 'lambda:base=[%s];%s' % (Q.descriptor, M.descriptor)

    def _compute(self, t):
        return self.Q.q_at(self.M.at(t))

    def float_at(self, t):
        return self.Q.float_at(self.M.at(t))

    def capped_digit(self, t, e):
        return self.Q.capped_digit(self.M.at(t), e)

    @property
    def period(self):
        p = self.Q.period
        if p is None:
            return None
        if isinstance(self.M, ArithmeticProgression):
            return p // math.gcd(p, self.M.m)
        if type(self.M) is IndexStream:
            return p
        return None

    @property
    def length(self):
        n = self.Q.length
        out = None if n is None else self.M.count_upto(n)
        if isinstance(self.M, ExplicitIndices):
            out = len(self.M.indices) if out is None else min(out, len(self.M.indices))
        return out


# ---------------------------------------------------------------------------
# Construction schedules


class CbwRule(object):
    """X_i = C_{b,w}, accessed digit by digit."""

    def __init__(self, b: int, w: int):
        self.b = b
        self.w = w

    def __len__(self):
        return cbw_length(self.b, self.w)

    @property
    def length(self) -> int:
        return cbw_length(self.b, self.w)

    def digit_at(self, p: int) -> int:
        return cbw_digit_at(self.b, self.w, p)

    def __iter__(self):
        return iter_cbw(self.b, self.w)

    def __repr__(self):
        return 'C_{%d,%d}' % (self.b, self.w)


class ExplicitRule(object):

    def __init__(self, block):
        self.block = block if isinstance(block, Block) else Block(block)

    @property
    def length(self) -> int:
        return len(self.block)

    def digit_at(self, p: int) -> int:
        if not 1 <= p <= len(self.block):
            raise IndexError(p)
        return self.block[p - 1]

    def __iter__(self):
        return iter(self.block)

    def __repr__(self):
        return str(self.block)


@dataclass(frozen=True)
class ScheduleTuple:
    """(l_i, b_i, v_i, eps_i, k_i, mu_i, m_i) plus the block rule for X_i."""
    l: int
    b: int
    v: int
    eps: Fraction
    k: int
    m: int
    block: object

    @property
    def mu(self) -> UniformMeasure:
        return UniformMeasure(self.b)

    @property
    def length(self) -> int:
        """l_i |X_i|."""
        return self.l * self.block.length


class ConstructionSchedule(object):
    """A BFF/APBFF: tuples i = 1, 2, ... either listed or given by a closed form.

    Cumulative lengths L_i = sum_{j <= i} l_j |X_j| are exact integers,
    extended lazily as positions are located.
    """

    def __init__(self, tuples: Sequence[ScheduleTuple] = None, tuple_fn: Callable[[int], ScheduleTuple] = None,
                 descriptor: str = 'schedule', validate: bool = True):
        if (tuples is None) == (tuple_fn is None):
            raise ValueError("Give exactly one of tuples or tuple_fn.")
        self._tuples = list(tuples) if tuples is not None else []
        self._fn = tuple_fn
        self._L = [0]
        self._lock = threading.Lock()
        self.descriptor = descriptor
        if validate and tuples is not None:
            problems = self.monotonicity_problems(len(self._tuples))
            if problems:
                raise ValueError("Schedule is not monotone: " + '; '.join(problems))

    @property
    def finite(self) -> bool:
        return self._fn is None

    def __len__(self):
        if not self.finite:
            raise TypeError("Closed-form schedules have no length.")
        return len(self._tuples)

    def tuple_at(self, i: int) -> ScheduleTuple:
        if i < 1:
            raise IndexError(i)
        if self._fn is not None:
            return self._fn(i)
        if i > len(self._tuples):
            raise IndexError("Schedule exhausted: it has %d tuples, asked for tuple %d." % (len(self._tuples), i))
        return self._tuples[i - 1]

    def has_tuple(self, i: int) -> bool:
        return not self.finite or 1 <= i <= len(self._tuples)

    def L(self, i: int) -> int:
        """L_i, with L_0 = 0."""
        with self._lock:
            while len(self._L) <= i:
                j = len(self._L)
                self._L.append(self._L[-1] + self.tuple_at(j).length)
            return self._L[i]

    def locate(self, n: int):
        """The i with L_{i-1} < n <= L_i, and the 1-based offset n - L_{i-1}."""
        if n < 1:
            raise IndexError("Positions start at 1, got %d." % n)
        with self._lock:
            known = list(self._L)
        if n <= known[-1]:
            i = bisect_left(known, n)
            return i, n - known[i - 1]
        i = len(known)
        while True:
            if not self.has_tuple(i):
                raise IndexError("Schedule exhausted before position %d (total length %d)."
                                 % (n, self.L(i - 1)))
            if self.L(i) >= n:
                return i, n - self.L(i - 1)
            i += 1

    def monotonicity_problems(self, upto: int) -> List[str]:
        problems = []
        prev = None
        for i in range(1, upto + 1):
            tup = self.tuple_at(i)
            if tup.b < 2:
                problems.append('b_%d < 2' % i)
            if prev is not None:
                for name in ['l', 'b', 'v', 'k', 'm']:
                    if getattr(tup, name) < getattr(prev, name):
                        problems.append('%s_%d decreases' % (name, i))
                if not tup.eps < prev.eps:
                    problems.append('eps_%d does not strictly decrease' % i)
                if tup.block.length < prev.block.length:
                    problems.append('|X_%d| decreases' % i)
            prev = tup
        return problems

    def iter_tuples(self) -> Iterator[ScheduleTuple]:
        i = 1
        while self.has_tuple(i):
            yield self.tuple_at(i)
            i += 1

    def __repr__(self):
        return 'ConstructionSchedule(%s)' % self.descriptor


class GammaSequence(BasicSequence):
    """Gamma(l, b, X): gamma_n = b_i for L_{i-1} < n <= L_i."""

    def __init__(self, schedule: ConstructionSchedule):
        self.schedule = schedule
        self.descriptor = 'gamma:' + schedule.descriptor

    def _compute(self, n):
        i, _ = self.schedule.locate(n)
        return self.schedule.tuple_at(i).b

    @property
    def length(self):
        if not self.schedule.finite:
            return None
        return self.schedule.L(len(self.schedule))


# ---------------------------------------------------------------------------
# Operations


def q_at(Q: BasicSequence, n: int) -> int:
    return Q.q_at(n)


def xi_transform(P: BasicSequence, c: Sequence, d: int, t: int = None) -> XiSequence:
    if t is not None and t != len(c):
        raise ValueError("t=%d but %d coefficients were given." % (t, len(c)))
    return XiSequence(P, c, d)


def lambda_subsequence(Q: BasicSequence, M: IndexStream) -> LambdaSequence:
    return LambdaSequence(Q, M)


def _sum_windows(Q, indices, k, exact):
    if exact:
        total = Fraction(0)
        for i in indices:
            prod = 1
            for j in range(i, i + k):
                prod *= Q.q_at(j)
            total += Fraction(1, prod)
        return total, 0.0
    acc = CompensatedSum()
    cache = {}
    for i in indices:
        prod = 1.0
        for j in range(i, i + k):
            if j not in cache:
                cache[j] = Q.float_at(j)
            prod *= cache[j]
        cache.pop(i, None)
        if math.isinf(prod):
            acc.neglect(_NEGLECT_BOUND)
        else:
            acc.add(1.0 / prod)
    return acc.value, acc.neglected


def qnk_partial(Q: BasicSequence, n: int, k: int, exact: bool = False, return_neglected: bool = False):
    """Q_n^{(k)} = sum_{j=1}^{n} 1 / (q_j ... q_{j+k-1}).

    The float path uses compensated summation and drops terms whose
    denominator exceeds 2^UNDERFLOW_BITS; `return_neglected` also returns
    an upper bound on the dropped mass.
    """
    if k < 1:
        raise ValueError("k must be >= 1.")
    value, neglected = _sum_windows(Q, range(1, max(n, 0) + 1), k, exact)
    if return_neglected:
        return value, neglected
    return value


def ap_indices(n: int, m: int, r: int) -> range:
    """Indices mj + r <= n for j >= 0, the index 0 skipped."""
    first = r if r > 0 else m
    return range(first, n + 1, m)


def qnk_ap_partial(Q: BasicSequence, n: int, k: int, m: int, r: int, exact: bool = False,
                   return_neglected: bool = False):
    """Q_{n,m,r}^{(k)}; with r = 0 the j = 0 term (which would need q_0) is skipped."""
    if k < 1:
        raise ValueError("k must be >= 1.")
    ArithmeticProgression(m, r)
    value, neglected = _sum_windows(Q, ap_indices(n, m, r), k, exact)
    if return_neglected:
        return value, neglected
    return value


def divergence_probe(Q: BasicSequence, k: int, m: int = 1, r: int = 0, variant: str = TYPE_I,
                     horizon: int = 10 ** 4, checkpoints: Iterable[int] = None) -> pd.DataFrame:
    """Partial sums at checkpoints: Q_{n,m,r}^{(k)} for type I, (Lambda_{A_{m,r}}(Q))_n^{(k)} for type II.

    For type II, n counts terms of the extracted sequence. On a finite
    sequence the sum stops at the last window that fits; checkpoints past
    that point are marked `truncated`.
    """
    if variant not in VARIANTS:
        raise ValueError("variant must be one of %s" % (VARIANTS, ))
    if checkpoints is None:
        checkpoints = geometric_checkpoints(horizon)
    checkpoints = sorted(set(c for c in checkpoints if 1 <= c <= horizon))
    if variant == TYPE_I:
        seq = Q
        indices = ap_indices(horizon, m, r)
    else:
        seq = LambdaSequence(Q, ArithmeticProgression(m, r))
        indices = range(1, horizon + 1)
    last = None if seq.length is None else seq.length - k + 1
    acc = CompensatedSum()
    rows = []
    pending = list(reversed(checkpoints))
    cache = {}
    for i in indices:
        while pending and pending[-1] < i:
            c = pending.pop()
            rows.append({'n': c, 'partial_sum': acc.value, 'neglected': acc.neglected, 'truncated': False})
        if last is not None and i > last:
            break
        prod = 1.0
        for j in range(i, i + k):
            if j not in cache:
                cache[j] = seq.float_at(j)
            prod *= cache[j]
        cache.pop(i, None)
        if math.isinf(prod):
            acc.neglect(_NEGLECT_BOUND)
        else:
            acc.add(1.0 / prod)
    else:
        for c in reversed(pending):
            rows.append({'n': c, 'partial_sum': acc.value, 'neglected': acc.neglected, 'truncated': False})
        pending = []
    for c in reversed(pending):
        rows.append({'n': c, 'partial_sum': acc.value, 'neglected': acc.neglected, 'truncated': True})
    df = pd.DataFrame(rows, columns=['n', 'partial_sum', 'neglected', 'truncated'])
    df['truncated'] = df['truncated'].astype(bool)
    df['variant'] = variant
    df['k'] = k
    df['m'] = m
    df['r'] = r
    return df


def is_infinite_in_limit_prefix(Q: BasicSequence, n: int, window: int = None) -> bool:
    """Whether min(q_j : j > n - window) exceeds max(q_j : j <= window) on the prefix of length n.

    A finite-prefix surrogate for q_n -> infinity.
    """
    if window is None:
        window = max(n // 4, 1)
    head = max(Q.q_at(j) for j in range(1, window + 1))
    tail = min(Q.q_at(j) for j in range(n - window + 1, n + 1))
    return tail > head
