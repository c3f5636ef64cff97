from fractions import Fraction

import numpy as np
import pytest

from cantor_normal.utils import (CompensatedSum, DescriptorError, as_fraction, format_block, geometric_checkpoints,
                                 lcm_all, parse_block, parse_fractions, read_digits, read_manifest, write_digits,
                                 write_manifest)


def test_block_literals():
    assert parse_block('(0,0,0,1,1,0,1,1)') == (0, 0, 0, 1, 1, 0, 1, 1)
    assert parse_block(' ( 2 , 10 ) ') == (2, 10)
    assert parse_block('()') == ()
    assert format_block([0, 1, 12]) == '(0,1,12)'
    for bad in ['0,1', '(0;1)', '(a)', '(-1)']:
        with pytest.raises(DescriptorError):
            parse_block(bad)


def test_fractions():
    assert parse_fractions('2,1,2') == [2, 1, 2]
    assert parse_fractions('1/2, 3') == [Fraction(1, 2), 3]
    assert as_fraction(0.5) == Fraction(1, 2)
    with pytest.raises(DescriptorError):
        parse_fractions('1/0')
    assert lcm_all([2, 3, 4]) == 12


def test_checkpoints():
    cps = geometric_checkpoints(100, 2, extra=[7, 500])
    assert cps == [1, 2, 4, 7, 8, 16, 32, 64, 100]
    assert geometric_checkpoints(0) == []


def test_compensated_sum():
    s = CompensatedSum()
    s.add(1.0)
    for _ in range(10):
        s.add(1e-16)
    s.add(-1.0)
    assert np.isclose(s.value, 1e-15, rtol=1e-12)
    s.neglect(2.0 ** -1000)
    assert s.n_neglected == 1
    assert s.neglected > 0


def test_manifest_and_digits(tmp_path):
    manifest = {'x': 'constant:3', 'horizon': '10'}
    fpath = str(tmp_path / 'm.txt')
    write_manifest(manifest, fpath)
    with open(fpath, 'a') as f:
        f.write('# comment\n\n')
    assert read_manifest(fpath) == manifest
    dpath = str(tmp_path / 'd.txt')
    write_digits([0, 1, 2], dpath, 'x=digits Q=constant:3')
    digits, header = read_digits(dpath, return_header=True)
    assert digits == [0, 1, 2]
    assert header == 'x=digits Q=constant:3'
