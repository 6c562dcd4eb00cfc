"""Tests for report writers, manifests and markdown summaries."""
import json

import numpy as np

from CoalescentLab.generators.manifest import ManifestWriter
from CoalescentLab.generators.markdown_generator import MarkdownGenerator
from CoalescentLab.generators.report_writer import format_csv, format_json, write_csv, write_json


def test_csv_uses_round_trip_floats():
    text = format_csv(['a', 'b', 'c'], [(1, 0.1, True), (np.int64(2), np.float64(1 / 3), None)])
    lines = text.splitlines()
    assert lines[0] == 'a,b,c'
    assert lines[1] == '1,0.1,true'
    assert float(lines[2].split(',')[1]) == 1 / 3
    assert lines[2].endswith(',')


def test_json_is_sorted_and_plain():
    text = format_json({'b': np.float64(0.5), 'a': np.arange(3), 'c': np.bool_(True)})
    assert text.endswith('\n')
    assert list(json.loads(text)) == ['a', 'b', 'c']
    assert json.loads(text)['a'] == [0, 1, 2]


def test_manifest_records_checksums(tmp_path):
    artifact = write_csv(tmp_path / 'run.csv', ['x'], [(1,), (2,)])
    writer = ManifestWriter('simulate-coalescent', {'seed': 1})
    writer.add(artifact)
    manifest_path = writer.write(artifact, 0.25)
    assert manifest_path.name == 'run.manifest.json'
    manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
    assert manifest['artifacts']['run.csv']['sha256'] == ManifestWriter.calculate_checksum(artifact)
    assert set(manifest['versions']) == {'CoalescentLab', 'numpy', 'scipy', 'python'}
    artifact.write_text('tampered\n', encoding='utf-8')
    assert manifest['artifacts']['run.csv']['sha256'] != ManifestWriter.calculate_checksum(artifact)


def test_markdown_report(tmp_path):
    report = {
        'config': {'seed': 1, 'output': None},
        'passed': False,
        'estimates': [{'t': 0.5, 'value': 1.01, 'stderr': 0.02, 'n': 100, 'passed': True}],
        'issues': {'critical': ['p-value too small'], 'warnings': [], 'info': []},
    }
    path = tmp_path / 'summary.md'
    content = MarkdownGenerator().generate_report('verify-martingale', report, path)
    assert path.read_text(encoding='utf-8') == content
    assert '🔴 FAIL' in content
    assert '| 0.5 | 1.01 | 0.02 | 100 | True |' in content
    assert '**critical**: p-value too small' in content
    assert 'output' not in content


def test_status_indicator():
    generator = MarkdownGenerator()
    assert generator.get_status_indicator(True) == '🟢 PASS'
    assert generator.get_status_indicator(None) == '⚪ n/a'


def test_write_json_creates_parents(tmp_path):
    path = write_json(tmp_path / 'nested' / 'out.json', {'x': 1})
    assert json.loads(path.read_text(encoding='utf-8')) == {'x': 1}
