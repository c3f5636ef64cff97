from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from cantor_normal.blocks import count_occurrences, count_occurrences_extracted, extract_residue
from cantor_normal.constants import AP_I, AP_II, PLAIN, SERIES_COLUMNS
from cantor_normal.digits import ExplicitStream, RandomUniformStream, canonicalize_periodic, psi_transform
from cantor_normal.sequences import ConstantSequence, ExplicitSequence, LinearSequence
from cantor_normal.stats import (count_stream, count_stream_parallel, distribution_discrepancy, predicted_limit,
                                 psi_count_drift, ratio_normality_series, star_discrepancy, trend_summary)
from cantor_normal.utils import read_series

C2 = ConstantSequence(2)
P3 = ConstantSequence(3)
ALT = ExplicitSequence((3, 2), periodic=True)
PERIODIC_01 = ExplicitStream(C2, (), (0, 1))


def test_periodic_plain():
    series = count_stream(PERIODIC_01, C2, [(0, )], horizon=10 ** 4)
    last = series.final((0, ))
    assert last['n'] == 10 ** 4
    assert last['count'] == 5000
    assert last['denominator'] == 5000
    assert last['ratio'] == 1.0
    assert list(series.frame.columns) == SERIES_COLUMNS
    early = series.block((0, ))
    assert np.isnan(early[early['n'] < 20]['ratio']).all()


def test_footnote_counts():
    x = ExplicitStream(P3, (), (2, 1))
    cps = [1, 2, 3, 10, 101, 1000, 9999, 10 ** 4]
    series = count_stream(x, P3, [(1, )], horizon=10 ** 4, checkpoints=cps)
    assert list(series.frame['count']) == [n // 2 for n in cps]
    canonical = canonicalize_periodic(psi_transform(x, P3, ALT))
    series = count_stream(canonical, ALT, [(1, )], horizon=10 ** 4, checkpoints=cps)
    assert (series.frame['count'] == 0).all()


def _oracle_case(rng, max_len=2000):
    b = int(rng.integers(2, 5))
    Y = rng.integers(0, b, int(rng.integers(50, max_len + 1)))
    k = int(rng.integers(1, 6))
    B = tuple(int(d) for d in rng.integers(0, b, k))
    if rng.random() < 0.5:
        B = tuple(int(d) for d in Y[10:10 + k])
    m = int(rng.integers(1, 7))
    r = int(rng.integers(0, m))
    return b, Y, B, m, r


def _check_against_naive_scan(rng, max_len=2000, parallel=False):
    b, Y, B, m, r = _oracle_case(rng, max_len)
    x = ExplicitStream(ConstantSequence(b), [int(d) for d in Y])
    cps = sorted(set(int(c) for c in rng.integers(1, len(Y) + 1, 5)) | {len(Y)})
    for mode in (PLAIN, AP_I):
        mm, rr = (1, 0) if mode == PLAIN else (m, r)
        series = count_stream(x, x.Q, [B], mode, mm, rr, len(Y), cps)
        expected = [count_occurrences(B, Y[:n], mm, rr).count for n in cps]
        assert list(series.frame['n']) == cps
        assert list(series.frame['count']) == expected
        if parallel:
            chunked = count_stream_parallel(x, x.Q, [B], mode, mm, rr, len(Y), cps, num_replicas=4,
                                            chunk_size=int(rng.integers(5, 2000)))
            assert list(chunked.frame['count']) == expected
    sub = extract_residue(Y, m, r)
    if len(sub) == 0:
        return
    sub_cps = sorted(set(c for c in cps if c <= len(sub)) | {len(sub)})
    series = count_stream(x, x.Q, [B], AP_II, m, r, len(sub), sub_cps)
    expected = [count_occurrences_extracted(B, sub[:n]).count for n in sub_cps]
    assert list(series.frame['count']) == expected


def test_streaming_matches_naive_scan():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        _check_against_naive_scan(rng)


@pytest.mark.slow
def test_streaming_matches_naive_scan_long_streams():
    rng = np.random.default_rng(1000)
    for _ in range(1000):
        _check_against_naive_scan(rng, max_len=10 ** 4, parallel=True)


def test_repeated_blocks_are_counted_once():
    blocks = [(0, ), (0, 1), (0, )]
    series = count_stream(PERIODIC_01, C2, blocks, horizon=1000)
    assert set(series.frame['block']) == {'(0)', '(0,1)'}
    assert series.final((0, ))['count'] == 500
    assert series.final((0, 1))['count'] == 500
    single = count_stream(PERIODIC_01, C2, [(0, ), (0, 1)], horizon=1000)
    pd.testing.assert_frame_equal(series.frame, single.frame)
    parallel = count_stream_parallel(PERIODIC_01, C2, blocks, horizon=1000, num_replicas=3, chunk_size=64)
    pd.testing.assert_frame_equal(series.frame, parallel.frame)


def test_finite_sequence_counts_to_its_last_digit():
    Q = ExplicitSequence((2, 2, 2, 2))
    x = ExplicitStream(Q, (0, 1, 0, 1))
    with pytest.warns(UserWarning):
        series = count_stream(x, Q, [(0, 1)], horizon=4, checkpoints=[2, 4])
    assert list(series.frame['count']) == [1, 2]
    assert list(series.frame['denominator']) == [0.5, 0.75]


def test_parallel_matches_single_pass():
    rng = np.random.default_rng(7)
    for _ in range(10):
        b, Y, B, m, r = _oracle_case(rng)
        x = ExplicitStream(ConstantSequence(b), [int(d) for d in Y])
        blocks = [B, B[:1]]
        for mode in (PLAIN, AP_I, AP_II):
            horizon = len(Y) if mode != AP_II else len(extract_residue(Y, m, r))
            if horizon == 0:
                continue
            single = count_stream(x, x.Q, blocks, mode, m, r, horizon)
            parallel = count_stream_parallel(x, x.Q, blocks, mode, m, r, horizon, num_replicas=3,
                                             chunk_size=int(rng.integers(5, 100)))
            pd.testing.assert_frame_equal(single.frame, parallel.frame)


def test_random_uniform_ratio():
    x = RandomUniformStream(ConstantSequence(10), seed=12345)
    series = count_stream(x, x.Q, [(3, ), (7, )], horizon=10 ** 5)
    for B in [(3, ), (7, )]:
        assert abs(series.final(B)['ratio'] - 1) < 0.05


def test_ap_residue_zero_warns():
    with pytest.warns(UserWarning):
        series = count_stream(PERIODIC_01, C2, [(1, )], AP_I, 2, 0, horizon=1000)
    assert series.adjusted
    assert series.final((1, ))['count'] == 500
    assert series.final((1, ))['ratio'] == 2.0


def test_invalid_digits_are_rejected():
    x = ExplicitStream(P3, (), (2, ))
    with pytest.raises(ValueError):
        count_stream(x, C2, [(0, )], horizon=10)
    with pytest.raises(ValueError):
        count_stream(x, P3, [()], horizon=10)
    with pytest.raises(ValueError):
        count_stream(x, P3, [(0, )], mode='apIII', horizon=10)


def test_predicted_limit():
    c = (2, 1, 2)
    assert predicted_limit(c, 4, k=1) == Fraction(4, 5)
    assert predicted_limit(c, 4, k=2) == 1
    assert predicted_limit(c, 4, k=3) == 1
    c = (4, 4, 1, 1, 4, 4, 1, 1)
    assert predicted_limit(c, 24, k=2) == Fraction(24, 46)
    assert predicted_limit(c, 24, k=2, mode=AP_II, m=2, r=0) == 1
    assert predicted_limit(c, 24, k=2, mode=AP_II, m=2, r=1) == 1
    with pytest.raises(ValueError):
        predicted_limit(c, 24, t=3)


def test_ratio_normality_series():
    df = ratio_normality_series(PERIODIC_01, C2, (0, ), (0, ), horizon=1000)
    assert (df[df['defined']]['ratio'] == 1).all()
    df = ratio_normality_series(PERIODIC_01, C2, (0, ), (1, ), horizon=1000)
    assert df['ratio'].iloc[-1] == 1
    df = ratio_normality_series(ExplicitStream(C2, (), (0, )), C2, (0, ), (1, ), horizon=100)
    assert not df['defined'].any()
    with pytest.raises(ValueError):
        ratio_normality_series(PERIODIC_01, C2, (0, ), (0, 1))


def test_discrepancy():
    assert star_discrepancy(np.zeros(10)) == 1.0
    assert np.isclose(star_discrepancy((np.arange(10) + 0.5) / 10), 0.05)
    zero = distribution_discrepancy(ExplicitStream(C2, (), (0, )), C2, 100)
    assert zero.discrepancy == 1.0
    x = RandomUniformStream(LinearSequence(2, 1), seed=99)
    result = distribution_discrepancy(x, x.Q, 10 ** 4)
    assert result.discrepancy < 0.05
    assert result.truncation_bound < 1e-10


def test_psi_count_drift_settles():
    P = LinearSequence(2, 1)
    Q = LinearSequence(2, 3)
    for seed in range(5):
        x = RandomUniformStream(P, seed=seed)
        report = psi_count_drift(x, P, Q, (1, ), horizon=20000)
        assert report.last_change <= 3
        assert report.max_abs_drift <= 3
        settled = report.frame[report.frame['n'] >= 3]['drift']
        assert (settled == settled.iloc[-1]).all()


@pytest.mark.slow
def test_psi_count_drift_settles_on_long_streams():
    for seed in range(20):
        s = 1 + seed % 4
        P = LinearSequence(2, s)
        Q = LinearSequence(2, s + 2)
        x = RandomUniformStream(P, seed=seed)
        report = psi_count_drift(x, P, Q, (1, ), horizon=10 ** 6)
        # q_n = 2 only for n <= s + 2; elsewhere psi keeps every digit 1 and creates none
        assert report.last_change <= s + 2
        settled = report.frame[report.frame['n'] >= s + 2]['drift']
        assert (settled == settled.iloc[-1]).all()


def test_series_files(tmp_path):
    series = count_stream(PERIODIC_01, C2, [(0, ), (0, 1)], horizon=500)
    fpath = str(tmp_path / 'series.csv')
    series.to_csv(fpath)
    df = read_series(fpath)
    assert list(df['count']) == list(series.frame['count'])
    series.to_json(str(tmp_path / 'series.json'), {'x': PERIODIC_01.descriptor})
    summary = trend_summary(df)
    assert set(summary['block']) == {'(0)', '(0,1)'}
    zeros = summary[summary['block'] == '(0)']
    assert abs(zeros['final_ratio'].iloc[0] - 1) < 0.01
    assert abs(summary[summary['block'] == '(0,1)']['final_ratio'].iloc[0] - 2) < 0.01
