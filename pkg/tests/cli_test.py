import json
import os

from cantor_normal.cli import main
from cantor_normal.constants import EXIT_DESCRIPTOR, EXIT_FAILURE, EXIT_GUARD, EXIT_OK
from cantor_normal.utils import read_digits, read_series, write_manifest


def _csv_rows(path):
    with open(path) as f:
        return f.read().strip().split('\n')[1:]


def test_preset(capsys):
    assert main(['preset', 'thm1_13', '--scale', 'desk', '--param', 'c=2,1,2', 'd=4']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'preset: preset:thm1_13;scale=desk;c=2,1,2;d=4' in out
    assert 'c: 2, 1, 2  d: 4' in out
    assert main(['preset', 'thm1_10', '--param', 't=2']) == EXIT_FAILURE
    assert main(['preset', 'thm1_7', '--param', 't']) == EXIT_DESCRIPTOR


def test_gen_digits(tmp_path):
    out = str(tmp_path / 'digits.txt')
    assert main(['gen-digits', '--construction', 'digits:period=2,1;Q=[constant:3]', '--n', '10',
                 '--out', out]) == EXIT_OK
    digits, header = read_digits(out, return_header=True)
    assert digits == [2, 1] * 5
    assert header.startswith('x=digits:head=;period=2,1')
    assert main(['gen-digits', '--construction', 'digits:period=2,1;Q=[constant:3]', '--q', 'constant:2',
                 '--n', '10', '--out', out]) == EXIT_DESCRIPTOR
    assert main(['gen-digits', '--construction', 'eta:preset=thm1_7;t=2', '--n', str(10 ** 9),
                 '--out', out]) == EXIT_GUARD
    assert main(['gen-digits', '--construction', 'eta:preset=thm1_9;t=2', '--n', '10',
                 '--out', out]) == EXIT_DESCRIPTOR


def test_count_and_ratios(tmp_path):
    out = str(tmp_path / 'series.csv')
    js = str(tmp_path / 'series.json')
    args = ['count', '--x', 'digits:period=0,1;Q=[constant:2]', '--blocks', '(0);(0,1)', '--horizon', '1000',
            '--out', out, '--json', js]
    assert main(args) == EXIT_OK
    df = read_series(out)
    last = df[df['n'] == 1000].set_index('block')
    assert last.loc['(0)', 'count'] == 500
    assert last.loc['(0,1)', 'count'] == 500
    with open(js) as f:
        assert json.load(f)['manifest']['horizon'] == '1000'
    assert main(args[:-2] + ['--workers', '2', '--out', str(tmp_path / 'parallel.csv')]) == EXIT_OK
    assert read_series(str(tmp_path / 'parallel.csv')).equals(df)
    assert main(['count', '--x', 'digits:period=0,1;Q=[constant:2]', '--blocks', '(0', '--horizon', '10']) \
        == EXIT_DESCRIPTOR
    ratios = str(tmp_path / 'ratios.csv')
    assert main(['ratios', '--x', 'digits:period=0,1;Q=[constant:2]', '--b1', '(0)', '--b2', '(1)',
                 '--horizon', '100', '--checkpoints', '10,100', '--out', ratios]) == EXIT_OK
    assert os.path.exists(ratios)


def test_solve_dioph(capsys, tmp_path):
    assert main(['solve-dioph', '--t', '3', '--A', '2,3', '--B', '1']) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out['found'] and out['d'] == 4
    assert out['certificate']['passed']
    assert set(out) == {'t', 'A', 'B', 'ap', 'max_h', 'max_d', 'candidates', 'found', 'c', 'd', 'certificate'}
    path = str(tmp_path / 'sol.json')
    assert main(['solve-dioph', '--t', '2', '--A', '1,2', '--max-h', '1', '--out', path]) == EXIT_OK
    with open(path) as f:
        assert not json.load(f)['found']
    assert main(['solve-dioph', '--t', '3', '--A', '2', '--ap', '2:2']) == EXIT_DESCRIPTOR


def test_solve_box(tmp_path, capsys):
    out = str(tmp_path / 'box.csv')
    assert main(['solve-box', '--t', '3', '--out', out]) == EXIT_OK
    assert len(_csv_rows(out)) == 3
    assert main(['solve-box', '--t', '2']) == EXIT_FAILURE
    capsys.readouterr()
    assert main(['solve-box', '--t', '10']) == EXIT_FAILURE
    assert 'no root in the box' in capsys.readouterr().err
    assert main(['solve-box', '--t', '3', '--eps', '1,2']) == EXIT_DESCRIPTOR


def test_check_good(capsys):
    assert main(['check-good', '--scale', 'desk']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'log2_r1' in out


def test_run(tmp_path, capsys):
    manifest = str(tmp_path / 'manifest.txt')
    write_manifest({'x': 'digits:period=0,1;Q=[constant:2]', 'blocks': '(0)', 'horizon': '1000'}, manifest)
    out_dir = str(tmp_path / 'bundle')
    assert main(['run', manifest, '--out_dir', out_dir]) == EXIT_OK
    assert os.path.exists(os.path.join(out_dir, 'series.csv'))
    assert 'observed' in capsys.readouterr().out
    write_manifest({'x': 'digits:period=0,1;Q=[constant:2]', 'blocks': '(0)', 'horizon': str(10 ** 9)}, manifest)
    assert main(['run', manifest]) == EXIT_GUARD
