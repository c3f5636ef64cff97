from fractions import Fraction

import numpy as np
import pytest

from cantor_normal.blocks import (Block, UniformMeasure, admissible_M, cbw_digit_at, cbw_length,
                                  concat_lexicographic, count_occurrences, count_occurrences_extracted,
                                  extract_residue, is_normal_block, is_normal_block_ap, iter_cbw, lemma_count_bounds,
                                  lemma_grid, normality_margin, threshold_sharpness, type_I_threshold,
                                  type_II_threshold, window_histogram)
from cantor_normal.constants import TYPE_I, TYPE_II
from cantor_normal.utils import GuardError

C22 = concat_lexicographic(2, 2)


def test_block():
    B = Block((0, 1, 2))
    assert len(B) == 3
    assert str(B) == '(0,1,2)'
    assert B == (0, 1, 2)
    assert B[1:] == Block((1, 2))
    assert hash(B) == hash(Block([0, 1, 2]))
    big = Block([2 ** 70])
    assert big[0] == 2 ** 70
    with pytest.raises(ValueError):
        Block((0, -1))
    with pytest.raises(ValueError):
        Block((0, 3), base_hint=3)


def test_concat_lexicographic():
    assert C22 == (0, 0, 0, 1, 1, 0, 1, 1)
    assert concat_lexicographic(2, 1) == (0, 1)
    c32 = concat_lexicographic(3, 2)
    assert len(c32) == 18 == cbw_length(3, 2)
    assert c32[:8] == (0, 0, 0, 1, 0, 2, 1, 0)
    with pytest.raises(GuardError):
        concat_lexicographic(10, 9, cap=10 ** 6)


def test_cbw_random_access():
    assert cbw_digit_at(2, 2, 4) == 1
    assert cbw_digit_at(2, 2, 1) == 0
    assert cbw_digit_at(3, 2, 6) == 2
    for b, w in [(2, 3), (3, 3), (5, 2)]:
        Y = concat_lexicographic(b, w)
        assert [cbw_digit_at(b, w, p) for p in range(1, len(Y) + 1)] == list(Y)
        assert list(iter_cbw(b, w)) == list(Y)
    # the last digit is b - 1 even when C_{b,w} is far too long to build
    assert cbw_digit_at(12, 720, cbw_length(12, 720)) == 11
    with pytest.raises(IndexError):
        cbw_digit_at(2, 2, 9)


def test_count_occurrences():
    assert count_occurrences((0, ), C22).count == 4
    assert count_occurrences((0, 0), (0, 0, 0)).count == 2
    assert count_occurrences((1, 1), C22, 2, 1).count == 1
    assert count_occurrences((1, 1), C22).count == 2
    assert count_occurrences((1, 1), C22, 2, 1).positions_scanned == 4
    assert list(extract_residue(C22, 2, 1)) == [0, 0, 1, 1]
    assert count_occurrences_extracted((0, 1), C22, 2, 1).count == 1
    assert count_occurrences_extracted((0, ), (0, 0, 0, 0), 2, 0).count == 2
    with pytest.raises(ValueError):
        count_occurrences((), C22)


def test_counts_match_naive_scan():
    rng = np.random.default_rng(0)
    for _ in range(50):
        Y = rng.integers(0, 3, rng.integers(1, 60))
        k = int(rng.integers(1, 4))
        B = rng.integers(0, 3, k)
        m = int(rng.integers(1, 5))
        r = int(rng.integers(0, m))
        naive = sum(1 for p in range(1, len(Y) - k + 2)
                    if p % m == r and list(Y[p - 1:p - 1 + k]) == list(B))
        assert count_occurrences(B, Y, m, r).count == naive
        hist = window_histogram(Y, k, 3, m, r)
        code = int(sum(int(d) * 3 ** (k - 1 - j) for j, d in enumerate(B)))
        assert hist[code] == naive


def test_is_normal_block():
    mu = UniformMeasure(2)
    assert is_normal_block(C22, Fraction(1, 2), 1, mu)
    assert not is_normal_block((0, 0, 0, 0), Fraction(1, 4), 1, mu)
    assert is_normal_block(concat_lexicographic(2, 4), Fraction(1, 2), 2, mu)
    assert mu.measure((0, 1)) == Fraction(1, 4)
    assert len(list(UniformMeasure(3).blocks(2))) == 9


def test_is_normal_block_ap():
    mu = UniformMeasure(2)
    assert is_normal_block_ap(C22, type_I_threshold(1, 1, 2), 1, 1, mu, TYPE_I)
    assert is_normal_block_ap(concat_lexicographic(2, 6), Fraction(2, 3), 2, 2, mu, TYPE_I)
    assert not is_normal_block_ap((0, 1) * 6, Fraction(1, 10), 1, 2, mu, TYPE_II)
    with pytest.raises(ValueError):
        is_normal_block_ap(C22, 1, 1, 1, mu, 'typeIII')


def test_type_I_normal_at_threshold():
    for b in (2, 3):
        for w in (4, 6):
            Y = concat_lexicographic(b, w)
            for M in admissible_M(w, (1, 2)):
                for K in range(1, min(3, w - 1) + 1):
                    eps = type_I_threshold(K, M, w)
                    assert is_normal_block_ap(Y, eps, K, M, UniformMeasure(b), TYPE_I)


def test_lemma_count_bounds():
    assert lemma_count_bounds(2, 2, 1, 0, 1) == (4, 8, 4, 4)
    lo_I, hi_I, _, _ = lemma_count_bounds(2, 2, 1, 0, 2)
    assert (lo_I, hi_I) == (1, 4)
    assert lemma_count_bounds(2, 2, 1, 0, 3)[2] == 0
    assert admissible_M(6, (1, 2, 3, 4)) == [1, 2, 3]


def test_lemma_grid():
    grid = lemma_grid()
    assert len(grid) > 0
    assert grid['lo_I_ok'].all()
    assert grid['hi_I_ok'].all()
    assert grid['lo_II_ok'].all()
    inside = grid[grid['k_le_w_over_m']]
    assert inside['hi_II_ok'].all()


def test_type_II_normal_at_threshold():
    for b in (2, 3):
        for w in (4, 6):
            Y = concat_lexicographic(b, w)
            for M in admissible_M(w, (1, 2)):
                for K in range(1, min(3, w - 1) + 1):
                    eps = type_II_threshold(K, M, w)
                    assert is_normal_block_ap(Y, eps, K, M, UniformMeasure(b), TYPE_II)


def test_hi_II_edge_row():
    grid = lemma_grid(bases=(2, ), widths=(2, ), Ms=(1, 2), max_k=2)
    row = grid[(grid['m'] == 2) & (grid['r'] == 0) & (grid['k'] == 2) & (grid['block'] == '(0,1)')].iloc[0]
    assert row['count_II'] == 2
    assert row['hi_II'] == 1
    assert not row['hi_II_ok']
    assert not row['k_le_w_over_m']
    outside = grid[~grid['k_le_w_over_m']]
    assert not outside['hi_II_ok'].all()


def test_normality_margin():
    mu = UniformMeasure(3)
    Y = concat_lexicographic(3, 2)
    # (2,0) occurs once, every other pair twice, against an expected count of 2
    assert normality_margin(Y, 2, 1, mu, TYPE_I) == Fraction(1, 2)
    assert normality_margin(Y, 1, 1, mu, TYPE_I) == 0
    assert is_normal_block_ap(Y, Fraction(1, 2), 2, 1, mu, TYPE_I)
    assert not is_normal_block_ap(Y, Fraction(1, 2) - Fraction(1, 10 ** 6), 2, 1, mu, TYPE_I)
    assert normality_margin((0, 0, 0, 0), 1, 1, UniformMeasure(2)) == 1
    with pytest.raises(ValueError):
        normality_margin((), 1, 1, mu)


def test_threshold_sharpness():
    df = threshold_sharpness()
    assert set(df['variant']) == {TYPE_I, TYPE_II}
    assert len(df) == 2 * 2 * (3 + 3 + 3 + 3)
    assert df['holds_at_threshold'].all()
    assert (df['ratio'] <= 1).all()
    for _, row in df.iterrows():
        b, w, K, M = int(row['b']), int(row['w']), int(row['K']), int(row['M'])
        Y = concat_lexicographic(b, w)
        assert is_normal_block_ap(Y, row['margin'], K, M, UniformMeasure(b), row['variant'])
        if row['margin'] > 0:
            below = row['margin'] * Fraction(999, 1000)
            assert not is_normal_block_ap(Y, below, K, M, UniformMeasure(b), row['variant'])
