"""
Unit tests for sweep_report.py
Tests result rows, canonical ordering and the written artifacts.
"""
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'bin'))

from ssc_errors import ContractViolationError
from sweep_report import RESULT_COLUMNS, SweepResult, SweepRow, emit_outputs


def _row(scheme='deepssc', snr_db=6.0, **overrides):
    values = dict(
        bleu1_bob=0.9, bleu3_bob=0.7, bleu1_eve=0.2, bleu3_eve=0.05,
        sbleu1=0.6, sbleu3=0.5, secrecy_proxy=1.25, capacity_secrecy_bits=2.0,
    )
    values.update(overrides)
    return SweepRow(scheme=scheme, snr_db=snr_db, **values)


@pytest.fixture
def sample_result():
    result = SweepResult(metadata={'seed': 3, 'profile': 'toy'})
    for scheme in ('integrated', 'no_ii', 'deepssc'):
        for snr in (18.0, 0.0):
            result.add(_row(scheme, snr))
    return result


class TestSweepRow:
    """Test SweepRow validation"""

    def test_score_out_of_range(self):
        """Test scores must lie in [0, 1]"""
        with pytest.raises(ContractViolationError):
            _row(sbleu3=1.5)

    def test_negative_proxy(self):
        """Test the secrecy proxy is non-negative"""
        with pytest.raises(ContractViolationError):
            _row(secrecy_proxy=-0.1)

    def test_csv_row(self):
        """Test the CSV view has exactly the result columns"""
        assert list(_row().csv_row()) == RESULT_COLUMNS


class TestSweepResult:
    """Test SweepResult bookkeeping"""

    def test_canonical_order(self, sample_result):
        """Test rows sort by scheme order, then SNR"""
        assert [(r.scheme, r.snr_db) for r in sample_result.rows] == [
            ('deepssc', 0.0), ('deepssc', 18.0),
            ('no_ii', 0.0), ('no_ii', 18.0),
            ('integrated', 0.0), ('integrated', 18.0),
        ]
        assert sample_result.schemes == ['deepssc', 'no_ii', 'integrated']

    def test_duplicate_rejected(self, sample_result):
        """Test one row per (scheme, SNR)"""
        with pytest.raises(ContractViolationError):
            sample_result.add(_row('no_ii', 0.0))

    def test_lookup(self, sample_result):
        """Test rows can be found by scheme and SNR"""
        assert sample_result.lookup('no_ii', 18.0).scheme == 'no_ii'
        with pytest.raises(KeyError):
            sample_result.lookup('no_ii', 9.0)

    def test_json_round_trip(self, sample_result):
        """Test results.json reloads to the same rows"""
        reloaded = SweepResult.from_json(sample_result.to_json())
        assert reloaded.rows == sample_result.rows
        assert reloaded.metadata == {'seed': 3, 'profile': 'toy'}


class TestEmitOutputs:
    """Test emit_outputs"""

    def test_artifacts_written(self, sample_result, temp_dir):
        """Test every artifact exists and is non-empty"""
        out_dir = os.path.join(temp_dir, 'out')
        written = emit_outputs(sample_result, out_dir)

        assert set(written) == {'csv', 'json', 'summary', 'bleu1', 'bleu3', 'sbleu'}
        for path in written.values():
            assert Path(path).exists()
            assert Path(path).stat().st_size > 0

    def test_csv_header(self, sample_result, temp_dir):
        """Test the exact results.csv header and row count"""
        written = emit_outputs(sample_result, temp_dir, plots=False)
        lines = Path(written['csv']).read_text(encoding='utf-8').splitlines()

        assert lines[0] == 'scheme,snr_db,bleu1_bob,bleu3_bob,bleu1_eve,bleu3_eve,sbleu1,sbleu3,secrecy_proxy'
        assert len(lines) == 7

    def test_csv_reload(self, sample_result, temp_dir):
        """Test results.csv reloads to the same scores"""
        written = emit_outputs(sample_result, temp_dir, plots=False)
        reloaded = SweepResult.read_csv(str(written['csv']))

        assert [r.csv_row() for r in reloaded.rows] == [r.csv_row() for r in sample_result.rows]

    def test_no_plots(self, sample_result, temp_dir):
        """Test plots=False skips the images"""
        written = emit_outputs(sample_result, temp_dir, plots=False)
        assert 'bleu1' not in written
        assert not (Path(temp_dir) / 'bleu1_vs_snr.png').exists()

    def test_summary_lists_schemes(self, sample_result, temp_dir):
        """Test SUMMARY.md carries metadata and scheme labels"""
        written = emit_outputs(sample_result, temp_dir, plots=False)
        summary = Path(written['summary']).read_text(encoding='utf-8')

        assert '**seed**: 3' in summary
        for label in ('DeepSSC', 'No-II', 'Int.'):
            assert f'| {label} |' in summary

    def test_empty_result(self, temp_dir):
        """Test an empty sweep is rejected"""
        with pytest.raises(ContractViolationError):
            emit_outputs(SweepResult(), temp_dir)
