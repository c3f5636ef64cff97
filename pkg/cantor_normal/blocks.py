from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterator, Iterable, Tuple
import math

import numpy as np
import pandas as pd

from cantor_normal.constants import MATERIALIZATION_CAP, TYPE_I, TYPE_II, VARIANTS
from cantor_normal.utils import GuardError, format_block, ceil_div

# digits at or above this are kept as Python ints
_WORD = 2 ** 62


class Block(object):
    """A finite ordered tuple of non-negative integer digits.

    Digits that fit a machine word are held in a read-only int64 array;
    anything wider falls back to an object array of Python ints.
    """

    __slots__ = ('_array', 'base_hint')

    def __init__(self, digits: Iterable = (), base_hint: int = None):
        array = _to_array(digits)
        if len(array) > 0 and array.min() < 0:
            raise ValueError("Block digits must be non-negative.")
        if base_hint is not None:
            if base_hint < 1:
                raise ValueError("base_hint must be a positive integer.")
            if len(array) > 0 and array.max() >= base_hint:
                raise ValueError("Block digit %d is not below base %d." % (int(array.max()), base_hint))
        array.setflags(write=False)
        self._array = array
        self.base_hint = base_hint

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def digits(self) -> Tuple[int, ...]:
        return tuple(int(d) for d in self._array)

    def __len__(self):
        return len(self._array)

    def __iter__(self):
        return (int(d) for d in self._array)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Block(self._array[item], base_hint=self.base_hint)
        return int(self._array[item])

    def __eq__(self, other):
        if isinstance(other, Block):
            other = other.digits
        try:
            return self.digits == tuple(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.digits)

    def __str__(self):
        return format_block(self._array)

    def __repr__(self):
        if self.base_hint is None:
            return 'Block(%s)' % format_block(self._array)
        return 'Block(%s, base_hint=%d)' % (format_block(self._array), self.base_hint)


def _to_array(digits) -> np.ndarray:
    if isinstance(digits, Block):
        return digits.array
    if isinstance(digits, np.ndarray) and digits.dtype != object:
        return np.array(digits, dtype=np.int64)
    digits = [int(d) for d in digits]
    if len(digits) == 0 or max(digits) < _WORD:
        return np.array(digits, dtype=np.int64)
    return np.array(digits, dtype=object)


def as_array(Y) -> np.ndarray:
    """Digits of a Block or any integer sequence as a numpy array."""
    if isinstance(Y, Block):
        return Y.array
    return _to_array(Y)


@dataclass(frozen=True)
class UniformMeasure:
    """The uniform measure lambda_b: every base-b block of length k has mass b^-k."""
    base: int

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("A uniform measure needs base >= 2.")

    def measure(self, B) -> Fraction:
        B = as_array(B)
        if len(B) > 0 and B.max() >= self.base:
            raise ValueError("Block %s is not in base %d." % (format_block(B), self.base))
        return Fraction(1, self.base ** len(B))

    def blocks(self, k: int) -> Iterator[Block]:
        for digits in product(range(self.base), repeat=k):
            yield Block(digits, base_hint=self.base)


@dataclass(frozen=True)
class CountResult:
    count: int
    positions_scanned: int


@lru_cache(maxsize=4096)
def _power(b: int, e: int) -> int:
    return b ** e


@lru_cache(maxsize=1024)
def cbw_length(b: int, w: int) -> int:
    """|C_{b,w}| = w * b^w, exact."""
    return w * b ** w


def _check_cbw(b, w):
    if b < 2:
        raise ValueError("C_{b,w} needs b >= 2.")
    if w < 1:
        raise ValueError("C_{b,w} needs w >= 1.")


def concat_lexicographic(b: int, w: int, cap: int = MATERIALIZATION_CAP) -> Block:
    """All base-b blocks of length w concatenated in lexicographic order."""
    _check_cbw(b, w)
    length = cbw_length(b, w)
    if length > cap:
        raise GuardError("C_{%d,%d} has %d digits, over the cap of %d; use cbw_digit_at instead."
                         % (b, w, length, cap))
    idx = np.arange(b ** w, dtype=np.int64)
    powers = b ** np.arange(w - 1, -1, -1, dtype=np.int64)
    digits = (idx[:, None] // powers[None, :]) % b
    return Block(digits.ravel(), base_hint=b)


def cbw_digit_at(b: int, w: int, p: int) -> int:
    """The p-th (1-based) digit of C_{b,w} without materializing it."""
    _check_cbw(b, w)
    if p < 1 or p > cbw_length(b, w):
        raise IndexError("Position %d outside C_{%d,%d}." % (p, b, w))
    s, u = divmod(p - 1, w)
    return (s // _power(b, w - 1 - u)) % b


def iter_cbw(b: int, w: int) -> Iterator[int]:
    """Lazily yield the digits of C_{b,w}."""
    _check_cbw(b, w)
    for blk in product(range(b), repeat=w):
        yield from blk


def _check_residue(m, r):
    if m < 1:
        raise ValueError("Modulus m must be >= 1.")
    if not 0 <= r < m:
        raise ValueError("Residue r must lie in [0, m-1].")


def extract_residue(Y, m: int, r: int) -> np.ndarray:
    """Digits of Y at 1-based positions p = r (mod m), in order."""
    _check_residue(m, r)
    Y = as_array(Y)
    return Y[(r - 1) % m::m]


def _starts(n_digits, k, m, r):
    # 0-based starts of windows of length k whose 1-based position is r mod m
    n_starts = n_digits - k + 1
    first = r if r > 0 else m
    if n_starts < first:
        return np.zeros(0, dtype=np.int64)
    return np.arange(first - 1, n_starts, m, dtype=np.int64)


def count_occurrences(B, Y, m: int = 1, r: int = 0) -> CountResult:
    """Occurrences of B in Y starting at positions p = r (mod m); overlaps count."""
    B = as_array(B)
    if len(B) == 0:
        raise ValueError("Cannot count the empty block.")
    _check_residue(m, r)
    Y = as_array(Y)
    starts = _starts(len(Y), len(B), m, r)
    if len(starts) == 0:
        return CountResult(0, 0)
    hits = np.ones(len(starts), dtype=bool)
    for j, digit in enumerate(B):
        hits &= np.asarray(Y[starts + j] == digit, dtype=bool)
    return CountResult(int(hits.sum()), len(starts))


def count_occurrences_extracted(B, Y, m: int = 1, r: int = 0) -> CountResult:
    """Type II count: occurrences of B in the subsequence of Y at positions r (mod m)."""
    B = as_array(B)
    if len(B) == 0:
        raise ValueError("Cannot count the empty block.")
    return count_occurrences(B, extract_residue(Y, m, r))


def window_histogram(Y, k: int, base: int, m: int = 1, r: int = 0) -> np.ndarray:
    """Counts of every base-`base` block of length k starting at positions r (mod m).

    Entry c holds the count of the block whose base-`base` value is c.
    """
    Y = as_array(Y)
    if len(Y) > 0 and Y.max() >= base:
        raise ValueError("Digits must be below base %d for a histogram." % base)
    starts = _starts(len(Y), k, m, r)
    codes = np.zeros(len(starts), dtype=np.int64)
    for j in range(k):
        codes = codes * base + Y[starts + j].astype(np.int64)
    return np.bincount(codes, minlength=base ** k)


def _within(counts, expected, eps):
    lo = (1 - eps) * expected
    hi = (1 + eps) * expected
    return lo <= int(counts.min()) and int(counts.max()) <= hi


def is_normal_block(Y, eps, k: int, mu: UniformMeasure) -> bool:
    """(eps, k, mu)-normality of a finite block."""
    Y = as_array(Y)
    if len(Y) == 0:
        raise ValueError("Normality of the empty block is not defined.")
    eps = Fraction(eps)
    n = len(Y)
    for kk in range(1, k + 1):
        counts = window_histogram(Y, kk, mu.base)
        if not _within(counts, Fraction(n, mu.base ** kk), eps):
            return False
    return True


def _ap_histograms(Y, k, m, mu, variant):
    # (expected count, histogram) for every k' <= k, m' <= m and r in [0, m'-1]
    if variant not in VARIANTS:
        raise ValueError("variant must be one of %s" % (VARIANTS, ))
    Y = as_array(Y)
    if len(Y) == 0:
        raise ValueError("Normality of the empty block is not defined.")
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1.")
    n = len(Y)
    for mm in range(1, m + 1):
        for rr in range(mm):
            positions = ceil_div(n - rr, mm)
            sub = extract_residue(Y, mm, rr) if variant == TYPE_II else None
            for kk in range(1, k + 1):
                if variant == TYPE_I:
                    counts = window_histogram(Y, kk, mu.base, mm, rr)
                else:
                    counts = window_histogram(sub, kk, mu.base)
                yield Fraction(positions, mu.base ** kk), counts


def is_normal_block_ap(Y, eps, k: int, m: int, mu: UniformMeasure, variant: str = TYPE_I) -> bool:
    """(eps, k, m, mu)-normality of type I or II.

    For every k' <= k, m' <= m and r in [0, m'-1] the count must lie within
    (1 +- eps) * mu(B) * ceil((|Y| - r) / m').
    """
    eps = Fraction(eps)
    return all(_within(counts, expected, eps) for expected, counts in _ap_histograms(Y, k, m, mu, variant))


def normality_margin(Y, k: int, m: int, mu: UniformMeasure, variant: str = TYPE_I) -> Fraction:
    """Smallest eps for which Y is (eps, k, m, mu)-normal of the given type."""
    margin = Fraction(0)
    for expected, counts in _ap_histograms(Y, k, m, mu, variant):
        if expected == 0:
            continue
        worst = max(expected - int(counts.min()), int(counts.max()) - expected)
        margin = max(margin, worst / expected)
    return margin


def lemma_count_bounds(b: int, w: int, m: int, r: int, k: int):
    """Lower/upper bounds on the type I and type II counts of any length-k block in C_{b,w}.

    Returns (lo_I, hi_I, lo_II, hi_II) as Fractions; lower bounds are clamped at 0.
    hi_II bounds the type II count only when k * m <= w. Longer windows of
    the extracted sequence reach across more than two consecutive blocks and
    can exceed it; for b = w = m = 2, r = 0 the block (0,1) occurs twice
    against hi_II = 1.
    """
    _check_cbw(b, w)
    _check_residue(m, r)
    scale = Fraction(b) ** (w - k)
    lo_I = max(((w - k + 1) // m) * scale, Fraction(0))
    hi_I = (Fraction(w, m) + 2) * scale
    lo_II = max(((w - r) // m - k + 1) * scale, Fraction(0))
    hi_II = ceil_div(w - r, m) * scale
    return lo_I, hi_I, lo_II, hi_II


def type_I_threshold(K: int, M: int, w: int) -> Fraction:
    return Fraction(M + max(K, M), w)


def type_II_threshold(K: int, M: int, w: int) -> Fraction:
    return Fraction((K + 1) * M, w)


def admissible_M(w: int, Ms: Iterable[int]):
    return [M for M in Ms if w % math.factorial(M) == 0]


def lemma_grid(bases=(2, 3), widths=(2, 4, 6), Ms=(1, 2), max_k: int = 3) -> pd.DataFrame:
    """Every block count of C_{b,w} against lemma_count_bounds over a parameter grid.

    The type II upper bound is reported strict as written (`hi_II_strict`)
    and non-strict (`hi_II_ok`); `k_le_w_over_m` marks rows where each window
    of the extracted sequence spans at most two consecutive blocks.
    """
    rows = []
    for b in bases:
        for w in widths:
            admissible = admissible_M(w, Ms)
            if len(admissible) == 0:
                continue
            Y = concat_lexicographic(b, w)
            for m in range(1, max(admissible) + 1):
                for r in range(m):
                    sub = extract_residue(Y, m, r)
                    for k in range(1, min(max_k, w) + 1):
                        lo_I, hi_I, lo_II, hi_II = lemma_count_bounds(b, w, m, r, k)
                        counts_I = window_histogram(Y, k, b, m, r)
                        counts_II = window_histogram(sub, k, b)
                        for code, digits in enumerate(product(range(b), repeat=k)):
                            n_I = int(counts_I[code])
                            n_II = int(counts_II[code])
                            rows.append({
                                'b': b, 'w': w, 'm': m, 'r': r, 'k': k,
                                'block': format_block(digits),
                                'count_I': n_I, 'count_II': n_II,
                                'lo_I': lo_I, 'hi_I': hi_I, 'lo_II': lo_II, 'hi_II': hi_II,
                                'lo_I_ok': lo_I <= n_I, 'hi_I_ok': n_I < hi_I,
                                'lo_II_ok': lo_II <= n_II, 'hi_II_ok': n_II <= hi_II,
                                'hi_II_strict': n_II < hi_II,
                                'k_le_w_over_m': k * m <= w,
                            })
    return pd.DataFrame(rows)


def threshold_sharpness(bases=(2, 3), widths=(4, 6), Ms=(1, 2), max_K: int = 3) -> pd.DataFrame:
    """Normality margins of C_{b,w} against the type I and type II thresholds.

    One row per (variant, b, w, M, K) with M admissible for w and K < w.
    `holds_at_threshold` compares the margin with the threshold and
    `holds_at_half` with half of it; `ratio` is margin / threshold.
    """
    rows = []
    for b in bases:
        mu = UniformMeasure(b)
        for w in widths:
            Y = concat_lexicographic(b, w)
            for M in admissible_M(w, Ms):
                for K in range(1, min(max_K, w - 1) + 1):
                    for variant in VARIANTS:
                        if variant == TYPE_I:
                            threshold = type_I_threshold(K, M, w)
                        else:
                            threshold = type_II_threshold(K, M, w)
                        margin = normality_margin(Y, K, M, mu, variant)
                        rows.append({
                            'variant': variant, 'b': b, 'w': w, 'M': M, 'K': K,
                            'margin': margin, 'threshold': threshold, 'ratio': float(margin / threshold),
                            'holds_at_threshold': margin <= threshold,
                            'holds_at_half': margin <= threshold / 2,
                        })
    return pd.DataFrame(rows)
