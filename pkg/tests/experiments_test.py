from fractions import Fraction
import os

import pytest

from cantor_normal.experiments import limits_frame, run_experiment
from cantor_normal.utils import DescriptorError, GuardError, read_manifest, read_series


def _read(path):
    with open(path, 'rb') as f:
        return f.read()


def test_thm1_13_desk_bundle(tmp_path):
    manifest = {'name': 'thm1_13_desk', 'x': 'preset:thm1_13;scale=desk', 'blocks': '(0);(0,0)',
                'horizon': '38976'}
    result = run_experiment(manifest, out_dir=str(tmp_path))
    limits = limits_frame(result).set_index('block')
    assert limits.loc['(0)', 'n'] == 38976
    assert limits.loc['(0)', 'predicted'] == '4/5'
    assert limits.loc['(0,0)', 'predicted'] == '1'
    for name in ('series.csv', 'summary.json', 'manifest.txt'):
        assert os.path.exists(os.path.join(str(tmp_path), name))
    assert read_manifest(os.path.join(str(tmp_path), 'manifest.txt')) == manifest


@pytest.mark.slow
def test_thm1_13_desk_limits():
    # the first region end past 10^6 digits
    horizon = 1400192
    manifest = {'x': 'preset:thm1_13;scale=desk', 'blocks': '(0);(0,0);(0,0,0)', 'horizon': str(horizon)}
    limits = limits_frame(run_experiment(manifest)).set_index('block')
    assert (limits['n'] == horizon).all()
    assert list(limits.loc[['(0)', '(0,0)', '(0,0,0)'], 'predicted']) == ['4/5', '1', '1']
    assert abs(limits.loc['(0)', 'observed'] - 0.8) < 0.02
    assert abs(limits.loc['(0,0)', 'observed'] - 1) < 0.02
    assert abs(limits.loc['(0,0,0)', 'observed'] - 1) < 0.02
    assert limits['within_tolerance'].all()


def test_thm1_11_desk_first_region():
    manifest = {'x': 'preset:thm1_11;scale=desk;k=2', 'blocks': '(0,0)', 'modes': 'plain,apII', 'm': '2',
                'residues': '0', 'horizon': '49152'}
    result = run_experiment(manifest)
    assert result.out_dir is None
    limits = limits_frame(result).set_index('mode')
    plain = limits.loc['plain']
    assert plain['count'] == 768
    assert plain['predicted'] == str(Fraction(24, 46))
    assert abs(plain['observed'] - 24 / 46) < 0.01
    ap = limits.loc['apII']
    assert ap['n'] == 24576
    assert ap['count'] == 384
    assert abs(ap['observed'] - 1) < 0.01
    assert set(result.series['mode']) == {'plain', 'apII'}


@pytest.mark.slow
def test_thm1_11_desk_limits():
    horizon = 1774592
    manifest = {'x': 'preset:thm1_11;scale=desk;k=2', 'blocks': '(0,0)', 'modes': 'plain,apII', 'm': '2',
                'horizon': str(horizon)}
    limits = limits_frame(run_experiment(manifest))
    plain = limits[limits['mode'] == 'plain'].iloc[0]
    assert plain['n'] == horizon
    assert abs(plain['observed'] - 24 / 46) < 0.01
    ap = limits[limits['mode'] == 'apII'].set_index('r')
    assert sorted(ap.index) == [0, 1]
    for r in (0, 1):
        assert ap.loc[r, 'n'] == horizon // 2
        assert ap.loc[r, 'predicted'] == '1'
        assert abs(ap.loc[r, 'observed'] - 1) < 0.01
    assert limits['within_tolerance'].all()



def test_bundle_is_reproducible(tmp_path):
    manifest = {'x': 'random:seed=7;Q=[constant:10]', 'blocks': '(3);(3,3)', 'modes': 'plain,apI', 'm': '2',
                'horizon': '20000', 'seed': '7'}
    first = run_experiment(manifest, out_dir=str(tmp_path / 'a'))
    second = run_experiment(manifest, out_dir=str(tmp_path / 'b'))
    for name in ('series.csv', 'summary.json'):
        assert _read(os.path.join(first.out_dir, name)) == _read(os.path.join(second.out_dir, name))
    threaded = run_experiment(dict(manifest, workers='3'), out_dir=str(tmp_path / 'c'))
    assert _read(os.path.join(first.out_dir, 'series.csv')) == _read(os.path.join(threaded.out_dir, 'series.csv'))
    df = read_series(os.path.join(first.out_dir, 'series.csv'))
    assert set(df['r']) == {0, 1}
    assert first.summary['seed'] == 7


def test_manifest_errors():
    base = {'x': 'digits:period=0,1;Q=[constant:2]', 'blocks': '(0)', 'horizon': '1000'}
    with pytest.raises(GuardError):
        run_experiment(dict(base, horizon=str(10 ** 9)))
    with pytest.raises(DescriptorError):
        run_experiment({'x': base['x'], 'blocks': '(0)'})
    with pytest.raises(DescriptorError):
        run_experiment(dict(base, colour='blue'))
    with pytest.raises(DescriptorError):
        run_experiment(dict(base, modes='plain,apIII'))
    with pytest.raises(DescriptorError):
        run_experiment(dict(base, blocks='(0);0,1'))
    with pytest.warns(UserWarning):
        run_experiment(dict(base, seed='3'))
