"""Digit streams of Q-Cantor expansions x = E_0 + sum E_n / (q_1 ... q_n)."""
from dataclasses import dataclass
from fractions import Fraction
from itertools import islice
from typing import Iterator, Optional, Sequence
import threading
import warnings

import numpy as np

from cantor_normal.blocks import as_array
from cantor_normal.constants import PREFIX_FACTOR_GUARD
from cantor_normal.sequences import (BasicSequence, ConstructionSchedule, GammaSequence, IndexStream,
                                     LambdaSequence)
from cantor_normal.utils import GuardError, lcm_all


class DigitRangeError(ValueError):
    """A digit E_n outside [0, q_n - 1]."""


class DigitStream(object):
    """A lazily evaluated expansion with governing sequence `Q`.

    Every call to `cursor` returns an independent iterator, so one stream
    can be shared between consumers.
    """
    Q = None
    integer_part = 0
    descriptor = None

    def digit_at(self, n: int) -> int:
        raise NotImplementedError

    def cursor(self, start: int = 1) -> Iterator[int]:
        n = start
        while True:
            yield self.digit_at(n)
            n += 1

    def __iter__(self):
        return self.cursor()

    def prefix(self, n: int) -> np.ndarray:
        digits = list(islice(self.cursor(), n))
        if len(digits) < n:
            raise IndexError("Stream %s ended after %d digits." % (self.descriptor, len(digits)))
        return as_array(digits)

    @property
    def preperiod(self) -> Optional[int]:
        return None

    @property
    def period(self) -> Optional[int]:
        """Length of the repeating part when the stream is eventually periodic."""
        return None

    def __repr__(self):
        return '%s(%s)' % (type(self).__name__, self.descriptor)


class EtaStream(DigitStream):
    """eta(l, X) = X_1^{l_1} X_2^{l_2} ..."""

    def __init__(self, schedule: ConstructionSchedule):
        self.schedule = schedule
        self.Q = GammaSequence(schedule)
        self.descriptor = 'eta:' + schedule.descriptor

    def digit_at(self, n):
        return eta_digit_at(self.schedule, n)

    def cursor(self, start=1):
        if start < 1:
            raise IndexError(start)
        i, offset = self.schedule.locate(start)
        tup = self.schedule.tuple_at(i)
        length = tup.block.length
        copy, pos = divmod(offset - 1, length)
        yield from islice(iter(tup.block), pos, None)
        for _ in range(tup.l - copy - 1):
            yield from tup.block
        i += 1
        while self.schedule.has_tuple(i):
            tup = self.schedule.tuple_at(i)
            for _ in range(tup.l):
                yield from tup.block
            i += 1


class ExplicitStream(DigitStream):
    """0.head period period ... w.r.t. Q; with an empty period the stream is finite."""

    def __init__(self, Q: BasicSequence, head: Sequence[int] = (), period: Sequence[int] = (),
                 integer_part: int = 0):
        self.Q = Q
        self.head = [int(d) for d in head]
        self._period = [int(d) for d in period]
        self.integer_part = integer_part
        if len(self.head) == 0 and len(self._period) == 0:
            raise ValueError("An explicit stream needs digits.")
        check = len(self.head) + (len(self._period) * (Q.period or 1) if self._period else 0)
        for n in range(1, check + 1):
            self.digit_at(n)
        self.descriptor = 'digits:head=%s;period=%s;Q=[%s]' % (
            ','.join(map(str, self.head)), ','.join(map(str, self._period)), Q.descriptor)
        if integer_part:
            self.descriptor += ';E0=%d' % integer_part

    def _raw(self, n):
        if n < 1:
            raise IndexError(n)
        h = len(self.head)
        if n <= h:
            return self.head[n - 1]
        if len(self._period) == 0:
            raise IndexError("Explicit stream has %d digits, asked for E_%d." % (h, n))
        return self._period[(n - h - 1) % len(self._period)]

    def digit_at(self, n):
        e = self._raw(n)
        if not self.Q.accepts(n, e):
            raise DigitRangeError("E_%d = %d is outside [0, q_%d - 1] for %s" % (n, e, n, self.Q.descriptor))
        return e

    def cursor(self, start=1):
        n = start
        while True:
            try:
                yield self.digit_at(n)
            except IndexError:
                return
            n += 1

    @property
    def preperiod(self):
        return len(self.head) if self._period else None

    @property
    def period(self):
        return len(self._period) or None


class RandomUniformStream(DigitStream):
    """E_n uniform on [0, q_n - 1], reproducible from `seed` at any position."""

    def __init__(self, Q: BasicSequence, seed: int = 0, chunk: int = 4096):
        self.Q = Q
        self.seed = seed
        self.chunk = chunk
        self._chunks = {}
        self._lock = threading.Lock()
        self.descriptor = 'random:seed=%d;Q=[%s]' % (seed, Q.descriptor)

    def _draw(self, c):
        rng = np.random.default_rng([self.seed, c])
        first = c * self.chunk + 1
        qs = [self.Q.q_at(n) for n in range(first, first + self.chunk)]
        small = np.array([q if q < 2 ** 62 else 2 for q in qs], dtype=np.int64)
        digits = [int(d) for d in rng.integers(0, small)]
        for j, q in enumerate(qs):
            if q >= 2 ** 62:
                nbytes = (q.bit_length() + 71) // 8
                digits[j] = int.from_bytes(rng.bytes(nbytes), 'little') % q
        return digits

    def digit_at(self, n):
        if n < 1:
            raise IndexError(n)
        c, j = divmod(n - 1, self.chunk)
        with self._lock:
            if c not in self._chunks:
                self._chunks[c] = self._draw(c)
            return self._chunks[c][j]


@dataclass
class HypothesisReport:
    """Witnesses of E_n < min_r (q_{r,n} - 1) among the inspected positions."""
    inspected: int
    witnesses: int
    last_witness: int

    @property
    def holds_on_prefix(self) -> bool:
        return self.witnesses > 0


class PsiStream(DigitStream):
    """F_n = min(E_n, q_{2,n} - 1, ..., q_{j,n} - 1), declared w.r.t. the last target.

    With a single target this is psi_{P,Q}; longer chains compose the
    transforms in order, which amounts to capping by every target.
    """

    def __init__(self, inner: DigitStream, P: BasicSequence, targets: Sequence[BasicSequence]):
        if len(targets) == 0:
            raise ValueError("psi needs at least one target sequence.")
        self.inner = inner
        self.P = P
        self.targets = list(targets)
        self.Q = self.targets[-1]
        self.integer_part = inner.integer_part
        self.descriptor = 'psi:inner=[%s];P=[%s];Q=%s' % (
            inner.descriptor, P.descriptor, ','.join('[%s]' % Q.descriptor for Q in self.targets))

    def _cap(self, n, e):
        if not self.P.accepts(n, e):
            raise DigitRangeError("E_%d = %d is not a valid digit w.r.t. %s" % (n, e, self.P.descriptor))
        for Q in self.targets:
            e = Q.capped_digit(n, e)
        return e

    def digit_at(self, n):
        return self._cap(n, self.inner.digit_at(n))

    def cursor(self, start=1):
        for n, e in enumerate(self.inner.cursor(start), start):
            yield self._cap(n, e)

    def is_witness(self, n: int, e: int) -> bool:
        return all(Q.capped_digit(n, e + 1) == e + 1 for Q in self.targets)

    def monitor(self, n: int) -> HypothesisReport:
        """Scan E_1..E_n of the input for positions satisfying the psi hypothesis."""
        witnesses = 0
        last = 0
        for j, e in enumerate(islice(self.inner.cursor(), n), 1):
            if self.is_witness(j, e):
                witnesses += 1
                last = j
        return HypothesisReport(n, witnesses, last)

    @property
    def preperiod(self):
        return self.inner.preperiod

    @property
    def period(self):
        periods = [self.inner.period] + [Q.period for Q in self.targets]
        if any(p is None for p in periods):
            return None
        return lcm_all(periods)


class UpsilonStream(DigitStream):
    """Upsilon_{Q,M}(x) = 0.E_{m_1} E_{m_2} ... w.r.t. Lambda_M(Q)."""

    def __init__(self, inner: DigitStream, M: IndexStream):
        self.inner = inner
        self.M = M
        self.Q = LambdaSequence(inner.Q, M)
        self.integer_part = inner.integer_part
        self.descriptor = 'upsilon:inner=[%s];%s' % (inner.descriptor, M.descriptor)

    def digit_at(self, t):
        return self.inner.digit_at(self.M.at(t))

    def cursor(self, start=1):
        t = start
        try:
            target = self.M.at(t)
        except IndexError:
            return
        pos = target
        inner = self.inner.cursor(target)
        for e in inner:
            if pos == target:
                yield e
                t += 1
                try:
                    nxt = self.M.at(t)
                except IndexError:
                    return
                if nxt <= target:
                    raise ValueError("Index stream is not strictly increasing at t=%d." % t)
                target = nxt
            pos += 1


# ---------------------------------------------------------------------------
# Operations


def eta_stream(schedule: ConstructionSchedule) -> EtaStream:
    return EtaStream(schedule)


def eta_digit_at(schedule: ConstructionSchedule, n: int) -> int:
    """The n-th digit of eta without streaming: locate the region, then the copy, then the digit."""
    i, offset = schedule.locate(n)
    rule = schedule.tuple_at(i).block
    return rule.digit_at((offset - 1) % rule.length + 1)


def psi_transform(x: DigitStream, P: BasicSequence, Q: BasicSequence) -> PsiStream:
    return PsiStream(x, P, [Q])


def compose_psi(x: DigitStream, sequences: Sequence[BasicSequence]) -> PsiStream:
    """psi_{Q_{j-1},Q_j} o ... o psi_{Q_1,Q_2} applied to x, a Q_1 expansion."""
    if len(sequences) < 2:
        raise ValueError("compose_psi needs Q_1 and at least one target.")
    return PsiStream(x, sequences[0], sequences[1:])


def upsilon_extract(x: DigitStream, M: IndexStream) -> UpsilonStream:
    return UpsilonStream(x, M)


def check_digits(x: DigitStream, n: int, Q: BasicSequence = None) -> int:
    """Validate E_1..E_n against Q and return the length of the trailing run of maximal digits.

    A trailing run covering at least half of the prefix triggers a warning,
    since the expansion may not be in canonical form.
    """
    Q = Q or x.Q
    run = 0
    for j, e in enumerate(islice(x.cursor(), n), 1):
        if not Q.accepts(j, e):
            raise DigitRangeError("E_%d = %d is outside [0, q_%d - 1]" % (j, e, j))
        if Q.capped_digit(j, e + 1) == e:
            run += 1
        else:
            run = 0
    if run >= 2 and 2 * run >= n:
        warnings.warn("The last %d of %d digits are all q_n - 1; the expansion may not be canonical."
                      % (run, n))
    return run


def evaluate_prefix(x: DigitStream, Q: BasicSequence = None, n: int = 1) -> Fraction:
    """E_0 + sum_{j <= n} E_j / (q_1 ... q_j), exactly."""
    if n > PREFIX_FACTOR_GUARD:
        raise GuardError("Refusing to multiply %d factors (guard is %d)." % (n, PREFIX_FACTOR_GUARD))
    Q = Q or x.Q
    numerator, denominator = 0, 1
    for j, e in enumerate(islice(x.cursor(), n), 1):
        q = Q.q_at(j)
        if not 0 <= e < q:
            raise DigitRangeError("E_%d = %d is outside [0, %d]" % (j, e, q - 1))
        numerator = numerator * q + e
        denominator *= q
    return x.integer_part + Fraction(numerator, denominator)


def _periodic_shape(x, Q):
    if x.period is None or x.preperiod is None:
        raise ValueError("%s is not known to be eventually periodic." % x.descriptor)
    if Q.period is None:
        raise ValueError("%s is not periodic." % Q.descriptor)
    return x.preperiod, lcm_all([x.period, Q.period])


def evaluate_periodic(x: DigitStream, Q: BasicSequence = None) -> Fraction:
    """Exact value of an eventually periodic expansion over a periodic Q.

    With h head digits and a joint period L, the tail contributes
    N / (D_h (D - 1)) where N / D is one period read with local denominators.
    """
    Q = Q or x.Q
    h, L = _periodic_shape(x, Q)
    head = evaluate_prefix(x, Q, h) if h > 0 else Fraction(x.integer_part)
    D_h = 1
    for j in range(1, h + 1):
        D_h *= Q.q_at(j)
    numerator, denominator = 0, 1
    for j in range(h + 1, h + L + 1):
        q = Q.q_at(j)
        numerator = numerator * q + x.digit_at(j)
        denominator *= q
    return head + Fraction(numerator, D_h * (denominator - 1))


def canonicalize_periodic(x: DigitStream, Q: BasicSequence = None) -> ExplicitStream:
    """The canonical expansion of an eventually periodic stream.

    A tail made only of q_n - 1 digits is replaced by zeros after carrying
    one into the last non-maximal head digit, or into E_0.
    """
    Q = Q or x.Q
    h, L = _periodic_shape(x, Q)
    head = [x.digit_at(j) for j in range(1, h + 1)]
    tail = [x.digit_at(j) for j in range(h + 1, h + L + 1)]
    if any(tail[j] != Q.q_at(h + 1 + j) - 1 for j in range(L)):
        return ExplicitStream(Q, head, tail, x.integer_part)
    integer_part = x.integer_part
    j = h
    while j > 0 and head[j - 1] == Q.q_at(j) - 1:
        j -= 1
    if j == 0:
        integer_part += 1
        head = [0] * h
    else:
        head = head[:j - 1] + [head[j - 1] + 1] + [0] * (h - j)
    return ExplicitStream(Q, head, [0], integer_part)
