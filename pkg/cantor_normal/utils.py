from typing import Iterable, List, Tuple, Dict
from fractions import Fraction
import math
import re

import numpy as np
import pandas as pd

from cantor_normal.constants import CHECKPOINT_GROWTH


class GuardError(ValueError):
    """A materialization, horizon or prefix guard was exceeded."""


class DescriptorError(ValueError):
    """A block literal, sequence descriptor or manifest could not be parsed."""


_BLOCK_RE = re.compile(r'^\(\s*(\d+(\s*,\s*\d+)*)?\s*\)$')


def parse_block(text: str) -> Tuple[int, ...]:
    """ Parse a block literal such as "(0,0,0,1,1,0,1,1)"."""
    text = text.strip()
    if not _BLOCK_RE.match(text):
        raise DescriptorError("Block literals look like '(0,1,2)', got %r" % text)
    inner = text[1:-1].strip()
    if inner == '':
        return ()
    return tuple(int(d) for d in inner.split(','))


def format_block(digits: Iterable[int]) -> str:
    return '(' + ','.join(str(int(d)) for d in digits) + ')'


def geometric_checkpoints(horizon: int, growth: float = CHECKPOINT_GROWTH, extra: Iterable[int] = ()) -> List[int]:
    """n = ceil(growth ** j) capped at the horizon, merged with any extra checkpoints."""
    if horizon < 1:
        return []
    points = {horizon}
    j = 0
    while True:
        n = math.ceil(growth ** j)
        if n >= horizon:
            break
        points.add(n)
        j += 1
    for n in extra:
        if 1 <= n <= horizon:
            points.add(int(n))
    return sorted(points)


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def lcm_all(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10 ** 12)
    return Fraction(value)


def parse_fractions(text: str) -> List[Fraction]:
    """ Parse "2,1,2" or "1/2,3" into Fractions."""
    try:
        return [as_fraction(t) for t in text.split(',') if t.strip() != '']
    except (ValueError, ZeroDivisionError):
        raise DescriptorError("Could not parse rationals from %r" % text)


def parse_ints(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(',') if t.strip() != '']
    except ValueError:
        raise DescriptorError("Could not parse integers from %r" % text)


class CompensatedSum(object):
    """Neumaier-compensated running sum of doubles.

    Terms that were dropped as underflowed are tracked separately through
    `neglect`, an upper bound on their total mass.
    """
    def __init__(self):
        self.total = 0.0
        self.compensation = 0.0
        self.neglected = 0.0
        self.n_neglected = 0

    def add(self, term: float):
        t = self.total + term
        if abs(self.total) >= abs(term):
            self.compensation += (self.total - t) + term
        else:
            self.compensation += (term - t) + self.total
        self.total = t

    def neglect(self, bound: float):
        self.neglected += bound
        self.n_neglected += 1

    @property
    def value(self) -> float:
        return self.total + self.compensation


def read_manifest(fpath) -> Dict[str, str]:
    """ Read a plain-text key = value manifest. Lines starting with # are comments."""
    manifest = {}
    with open(fpath) as f:
        for i, line in enumerate(f):
            line = line.split('#', 1)[0].strip()
            if line == '':
                continue
            if '=' not in line:
                raise DescriptorError("Line %d of %s is not 'key = value'" % (i + 1, fpath))
            key, value = line.split('=', 1)
            manifest[key.strip()] = value.strip()
    return manifest


def write_manifest(manifest: Dict[str, str], fpath):
    with open(fpath, 'w') as f:
        for key in sorted(manifest):
            f.write('%s = %s\n' % (key, manifest[key]))


def write_digits(digits: Iterable[int], fpath, header: str):
    """ Write a digit dump: one header line starting with '>' then one digit per line."""
    with open(fpath, 'w') as f_out:
        f_out.write('>' + header.replace('\n', ' ') + '\n')
        for d in digits:
            f_out.write(str(int(d)) + '\n')


def read_digits(fpath, return_header=False):
    """ Read a digit dump written by write_digits."""
    digits = []
    with open(fpath) as f_in:
        header = f_in.readline()
        if not header.startswith('>'):
            raise DescriptorError("%s is not a digit dump (missing '>' header)" % fpath)
        header = header[1:].replace('\n', '')
        for line in f_in:
            line = line.strip()
            if line != '':
                digits.append(int(line))
    if return_header:
        return digits, header
    return digits


def read_series(fpath) -> pd.DataFrame:
    """ Load a ratio series CSV, restoring the numeric columns."""
    df = pd.read_csv(fpath, dtype={'block': str, 'mode': str})
    for col in ['n', 'm', 'r', 'count']:
        df[col] = df[col].astype(np.int64)
    df['denominator'] = df['denominator'].astype(float)
    df['ratio'] = pd.to_numeric(df['ratio'], errors='coerce')
    return df
