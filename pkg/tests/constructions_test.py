from fractions import Fraction

import pytest

from cantor_normal.constants import AP_I, AP_II, DESK_DIGITS, PLAIN
from cantor_normal.constructions import (DESK, SCALED_BY_T, ExactRatio, ScheduleProfile, check_good_conditions,
                                         default_profile, desk_profile, exact_schedule, predicted_table, preset,
                                         scaled_schedule, thm1_11_coefficients, thm1_7_parameters, trend)
from cantor_normal.sequences import ConstantSequence, GammaSequence, LinearSequence


def test_thm1_7_parameters():
    p = thm1_7_parameters(6, 2)
    assert (p['b'], p['w'], p['k'], p['m']) == (12, 720, 6, 6)
    assert p['eps'] == Fraction(1, 6)
    assert p['l'] == 3 ** 720 * 7 ** (720 * 6)
    assert p['X_len'] == 720 * 12 ** 720
    assert p['L'] == p['l'] * p['X_len']
    early = thm1_7_parameters(3, 2)
    assert (early['b'], early['w'], early['l'], early['L']) == (6, None, 0, 0)
    assert thm1_7_parameters(1, 1)['b'] == 2
    scaled = thm1_7_parameters(6, 2, SCALED_BY_T, with_L=False)
    assert scaled['l'] == 3 ** 720 * 14 ** (720 * 6)
    assert 'L' not in scaled
    with pytest.raises(ValueError):
        thm1_7_parameters(6, 2, 'doubled')
    with pytest.raises(ValueError):
        thm1_7_parameters(0, 2)


def test_exact_schedule():
    schedule = exact_schedule(2)
    assert not schedule.finite
    assert schedule.descriptor == 'preset=thm1_7;t=2'
    assert exact_schedule(2, SCALED_BY_T).descriptor == 'preset=thm1_7;t=2;l=scaled_by_t'
    assert schedule.L(5) == 0
    assert schedule.L(6) == thm1_7_parameters(6, 2)['L']
    assert schedule.tuple_at(6).block.w == 720
    assert schedule.locate(1) == (6, 1)
    assert GammaSequence(schedule).q_at(1) == 12
    assert schedule.monotonicity_problems(8) == []


def test_default_profile():
    profile = default_profile()
    assert profile.bases == list(range(2, 11))
    assert profile.widths == [2, 2] + [4] * 7
    assert profile.reps == [1, 3, 3, 7, 20, 65, 229, 858, 3378]
    built = scaled_schedule(profile)
    assert built.schedule.L(8) < 10 ** 8
    assert built.schedule.monotonicity_problems(len(built.schedule)) == []
    assert set(built.report.verdicts) == {'r1', 'r2', 'r3'}
    assert len(built.report.frame) == len(built.schedule) - 2


def test_desk_profiles():
    p13 = desk_profile('thm1_13')
    assert (p13.bases, p13.widths, p13.reps) == ([4, 6, 8, 10, 12], [4] * 5, [1, 1, 2, 5, 14])
    assert p13.ks == [3] * 5 and p13.ms == [1] * 5
    schedule = scaled_schedule(p13).schedule
    assert [schedule.L(i) for i in range(1, 6)] == [1024, 6208, 38976, 238976, 1400192]
    assert schedule.L(4) < DESK_DIGITS <= schedule.L(5)
    assert all(b % 3 == 0 for b in desk_profile('thm1_13', c=(3, 1)).bases)
    p11 = desk_profile('thm1_11', k=2)
    assert p11.bases == [8, 12, 16]
    schedule = scaled_schedule(p11).schedule
    assert schedule.L(1) == 49152
    assert schedule.L(3) == 1774592
    p10 = desk_profile('thm1_10', t=3)
    assert p10.bases == [12]
    assert desk_profile('thm1_7').name == 'default'
    with pytest.raises(ValueError):
        desk_profile('thm2_1')


def test_constant_schedule_fails_good_conditions():
    profile = ScheduleProfile([2] * 4, [2] * 4, [1] * 4)
    built = scaled_schedule(profile)
    report = check_good_conditions(built.schedule, 2, start=2, stop=3)
    assert [r.fraction() for r in report.ratios['r1']] == [1, 3]
    assert [r.fraction() for r in report.ratios['r2']] == [8, 12]
    assert report.verdicts == {'r1': 'not decreasing', 'r2': 'not decreasing', 'r3': 'constant'}
    assert not report.passed
    with pytest.raises(ValueError):
        scaled_schedule(profile, strict=True)
    with pytest.raises(ValueError):
        check_good_conditions(built.schedule, 2, start=2, stop=4)


def test_profile_rejects_decreasing_reps():
    with pytest.raises(ValueError):
        scaled_schedule(ScheduleProfile([2, 3, 4], [2, 2, 2], [3, 5, 3]))
    with pytest.raises(ValueError):
        ScheduleProfile([2, 3], [2], [1, 1])


def test_exact_ratio_and_trend():
    assert ExactRatio(1, 3) < ExactRatio(1, 2)
    assert ExactRatio(2, 4) == ExactRatio(1, 2)
    assert ExactRatio(3, 6).fraction() == Fraction(1, 2)
    assert trend([ExactRatio(3, 1), ExactRatio(2, 1), ExactRatio(1, 1)]) == 'decreasing'
    assert trend([ExactRatio(1, 1)]) == 'undetermined'
    assert trend([None, ExactRatio(1, 1), ExactRatio(1, 1)]) == 'constant'
    with pytest.raises(ValueError):
        ExactRatio(1, 0)


@pytest.mark.slow
def test_exact_schedule_good_conditions():
    report = check_good_conditions(exact_schedule(2), 2, start=7, stop=8)
    assert report.verdicts['r1'] == 'decreasing'
    assert report.verdicts['r2'] == 'decreasing'
    assert report.verdicts['r3'] == 'not decreasing'


def test_thm1_7_preset():
    p = preset('thm1_7')
    assert p.params == {'t': 2}
    assert p.Q.q_at(1) == 12
    assert p.x.digit_at(1) == 0
    assert (p.predicted['limit'] == '1').all()
    assert p.descriptor == 'preset:thm1_7;scale=exact;t=2'
    with pytest.raises(ValueError):
        preset('thm1_7', {'t': 1})
    with pytest.raises(ValueError):
        preset('thm1_8')


def test_thm1_10_preset():
    p = preset('thm1_10', {'t': 3})
    assert p.c == [6, 1, 1] and p.d == 6
    assert [p.limit(PLAIN, k) for k in (1, 2, 3)] == [Fraction(6, 8), Fraction(6, 7), 1]
    assert any('alpha_j' in note for note in p.notes)
    with pytest.raises(ValueError):
        preset('thm1_10', {'t': 2})
    with pytest.warns(UserWarning):
        p = preset('thm1_10', {'t': 2, 'allow_degenerate': True})
    assert p.d == 2


def test_thm1_11_preset():
    assert thm1_11_coefficients(2) == [4, 4, 1, 1, 4, 4, 1, 1]
    p = preset('thm1_11', {'k': 2})
    assert p.d == 24 and len(p.c) == 8
    assert p.limit(PLAIN, 2) == Fraction(24, 46)
    assert p.limit(AP_II, 2, 2, 0) == 1
    assert p.limit(AP_II, 2, 2, 1) == 1
    with pytest.raises(KeyError):
        p.limit(AP_I, 2, 3, 0)


def test_thm1_13_preset():
    p = preset('thm1_13', scale=DESK)
    assert p.descriptor == 'preset:thm1_13;scale=desk;c=2,1,2;d=4'
    assert p.limit(PLAIN, 1) == Fraction(4, 5)
    assert p.limit(PLAIN, 2) == 1
    assert p.notes == []
    assert p.Q.q_at(4) == 2 and p.Q.q_at(1) == 4 and p.Q.q_at(2) == 2
    for n in range(1, 200):
        assert 0 <= p.x.digit_at(n) < p.Q.q_at(n)
    with pytest.raises(ValueError):
        preset('thm1_13', {'c': (2, 1, 2), 'd': 3})


def test_thm1_15_preset():
    p = preset('thm1_15', scale=DESK)
    assert isinstance(p.Q, LinearSequence)
    assert len(p.predicted) == 0
    for n in range(1, 200):
        assert 0 <= p.x.digit_at(n) < p.Q.q_at(n)
    with pytest.warns(UserWarning):
        preset('thm1_15', {'Q': ConstantSequence(3)}, scale=DESK)


def test_predicted_table():
    df = predicted_table()
    assert (df['limit'] == '1').all()
    assert len(df) == 2 * (1 + 2 * (1 + 2))
    df = predicted_table((2, 1, 2), 4, max_k=3, ms=(1, ))
    assert set(df['mode']) == {PLAIN, AP_I, AP_II}
