"""End-to-end tests of the command-line interface."""
import csv
import io
import json

import pytest

from conftest import K_SIGMA, poisson_g_series
from CoalescentLab import cli
from CoalescentLab.generators.manifest import ManifestWriter

SPEC = '{"kind": "compound_poisson", "rate": 1.0, "jump": {"dist": "constant", "a": 1.0}, "c": 1.0}'
ZERO_SPEC = '{"kind": "zero", "c": 0.5}'


def run(capsys, *argv):
    status = cli.main(list(argv))
    captured = capsys.readouterr()
    return status, captured.out, captured.err


def error_line(stderr):
    lines = [line for line in stderr.splitlines() if line.startswith('{')]
    return json.loads(lines[-1])


def test_simulate_coalescent_csv(capsys):
    status, out, _ = run(capsys, 'simulate-coalescent', '--n', '5', '--t', '100', '--replicates', '3', '--seed', '1')
    assert status == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ['replicate', 'event_index', 'time', 'k', 'largest_mass', 'second_mass']
    assert len(rows) == 15
    assert [int(row['k']) for row in rows[:5]] == [5, 4, 3, 2, 1]


def test_simulate_fragmentation_masses_sum_to_one(capsys):
    status, out, _ = run(capsys, 'simulate-fragmentation', '--t', '1', '--grid', '1024', '--replicates', '4',
                         '--theta', '0.6', '--seed', '2')
    assert status == 0
    totals = {}
    for row in csv.DictReader(io.StringIO(out)):
        totals[row['replicate']] = totals.get(row['replicate'], 0.0) + float(row['mass'])
    assert len(totals) == 4
    assert all(total == pytest.approx(1.0) for total in totals.values())


def test_density_g_matches_series(capsys):
    status, out, _ = run(capsys, 'density', '--what', 'g', '--spec', SPEC, '--t', '1', '--x', '0.5',
                         '--mc', '20000', '--seed', '3')
    assert status == 0
    report = json.loads(out)
    assert abs(report['value'] - poisson_g_series(1.0, 0.5)) <= K_SIGMA * report['stderr']
    assert report['config']['seed'] == 3
    assert 'workers' not in report['config']


def test_density_reads_spec_file(capsys, tmp_path):
    path = tmp_path / 'spec.json'
    path.write_text(ZERO_SPEC, encoding='utf-8')
    status, out, _ = run(capsys, 'density', '--what', 'H', '--spec', str(path), '--t', '1', '--x', '0.5,0.5',
                         '--seed', '3')
    assert status == 0
    assert json.loads(out)['value'] == 1.0


def test_verify_pde_zero_spec(capsys):
    status, out, _ = run(capsys, 'verify-pde', '--spec', ZERO_SPEC, '--t', '0.5', '--x-list', '0.25,0.5,1',
                         '--seed', '4')
    assert status == 0
    report = json.loads(out)
    assert report['passed']
    assert [row['residual'] for row in report['residuals']] == [0.0, 0.0, 0.0]


def test_classify_spec(capsys):
    status, out, _ = run(capsys, 'classify-spec', '--spec', SPEC, '--delta', '0.5', '--seed', '5')
    assert status == 0
    report = json.loads(out)
    assert report['verdict'] == 'holds_numerically'
    assert report['mean_rate'] == 1.0


def test_verify_marginal_writes_artifacts(capsys, tmp_path):
    output = tmp_path / 'marginal.json'
    markdown = tmp_path / 'marginal.md'
    status, out, _ = run(capsys, 'verify-marginal', '--t', '1', '--grid', '1024', '--replicates', '200',
                         '--seed', '6', '-o', str(output), '--markdown', str(markdown))
    assert status == 0
    assert out == ''
    report = json.loads(output.read_text(encoding='utf-8'))
    assert report['bins'] == 20
    manifest = tmp_path / 'marginal.manifest.json'
    artifacts = json.loads(manifest.read_text(encoding='utf-8'))['artifacts']
    assert set(artifacts) == {'marginal.json', 'marginal.md'}
    for name, entry in artifacts.items():
        assert entry['sha256'] == ManifestWriter.calculate_checksum(tmp_path / name)
    assert '# verify-marginal' in markdown.read_text(encoding='utf-8')


def test_repeated_runs_are_byte_identical(capsys, tmp_path):
    paths = []
    for index, workers in enumerate(('1', '1', '4')):
        path = tmp_path / f'run{index}.csv'
        status, _, _ = run(capsys, 'simulate-fragmentation', '--t', '0.5', '--grid', '512', '--replicates', '8',
                           '--seed', '7', '--workers', workers, '-o', str(path))
        assert status == 0
        paths.append(path)
    contents = [path.read_bytes() for path in paths]
    assert contents[0] == contents[1] == contents[2]


def test_saved_config_reproduces_the_run(capsys, tmp_path):
    saved = tmp_path / 'run.json'
    status, first, _ = run(capsys, 'simulate-coalescent', '--n', '5', '--t', '2', '--replicates', '2', '--seed', '3',
                           '--save-config', str(saved))
    assert status == 0
    stored = json.loads(saved.read_text(encoding='utf-8'))
    assert stored['seed'] == 3
    assert stored['command'] == 'simulate-coalescent'
    assert 'save_config' not in stored
    status, second, _ = run(capsys, 'simulate-coalescent', '--config', str(saved))
    assert status == 0
    assert second == first


def test_martingale_report_independent_of_workers(capsys):
    outputs = []
    for workers in ('1', '3'):
        status, out, _ = run(capsys, 'verify-martingale', '--spec', SPEC, '--t-list', '0.5', '--grid', '256',
                             '--replicates', '6', '--mc', '1000', '--normalizer-mc', '10000', '--seed', '8',
                             '--workers', workers)
        assert status == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]
    report = json.loads(outputs[0])
    assert report['functional'] == 'one'
    assert report['estimates'][0]['t'] == 0.5


def test_missing_seed_is_reported(capsys):
    status, _, err = run(capsys, 'simulate-coalescent', '--n', '5')
    assert status == 1
    line = error_line(err)
    assert line['error'] == 'ConfigError'
    assert 'seed' in line['message']
    assert line['command'] == 'simulate-coalescent'


def test_spec_command_without_spec(capsys):
    status, _, err = run(capsys, 'verify-pde', '--seed', '1')
    assert status == 1
    assert 'needs --spec' in error_line(err)['message']


def test_invalid_arguments_exit_with_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(['density', '--what', 'nothing', '--seed', '1'])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2


def test_interrupt_exit_code(capsys, monkeypatch):
    def interrupted(config):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, 'run', interrupted)
    status, _, _ = run(capsys, 'simulate-coalescent', '--seed', '1')
    assert status == cli.EXIT_INTERRUPTED


def test_config_file_with_flag_override(capsys, tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'n': 4, 't': 100.0, 'replicates': 2, 'seed': 9}), encoding='utf-8')
    status, out, _ = run(capsys, 'simulate-coalescent', '--config', str(path), '--replicates', '1')
    assert status == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {row['replicate'] for row in rows} == {'0'}
    assert len(rows) == 4
