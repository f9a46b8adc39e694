"""
Unit tests for ssc_metrics.py
Tests BLEU, S-BLEU, corpus aggregation and file scoring.
"""
import csv
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'bin'))

from ssc_errors import ContractViolationError
from ssc_metrics import (
    SCORE_COLUMNS,
    WEIGHTS_1GRAM,
    WEIGHTS_3GRAM,
    bleu,
    corpus_score,
    ngram_counts,
    sbleu,
    score_files,
    weights_for,
)

SOURCE = 'weather is good today'.split()
BOB = 'weather is nice today'.split()
EVE = 'weather good'.split()
WORDS = ['a', 'b', 'c', 'd', 'e', 'f']


def _random_sentence(rng, low=1):
    return list(rng.choice(WORDS, size=rng.integers(low, 8)))


class TestNgramCounts:
    """Test ngram_counts"""

    def test_unigrams(self):
        """Test repeated words are counted"""
        profile = ngram_counts(['a', 'b', 'a'], 1)
        assert profile.counts == {('a',): 2, ('b',): 1}
        assert profile.total() == 3

    def test_trigrams(self):
        """Test sliding windows of three"""
        assert ngram_counts(['a', 'b', 'c', 'd'], 3).total() == 2

    def test_too_short(self):
        """Test a sentence shorter than n has no n-grams"""
        assert ngram_counts(['a', 'b'], 3).total() == 0

    def test_invalid_order(self):
        """Test n < 1 is rejected"""
        with pytest.raises(ContractViolationError):
            ngram_counts(['a'], 0)


class TestSentenceScores:
    """Test bleu and sbleu on single sentences"""

    def test_worked_example_bleu(self):
        """Test Bob's 1-gram BLEU is 0.75"""
        assert bleu(SOURCE, BOB, WEIGHTS_1GRAM).score == pytest.approx(0.75, abs=1e-12)

    def test_worked_example_sbleu(self):
        """Test only 'is' and 'today' are secured: 0.5"""
        report = sbleu(SOURCE, BOB, EVE, WEIGHTS_1GRAM)
        assert report.score == pytest.approx(0.5, abs=1e-12)
        assert report.penalty == 0.0

    def test_identity(self):
        """Test BLEU(s, s) = 1 and S-BLEU with an empty Eve = 1"""
        assert bleu(SOURCE, SOURCE, WEIGHTS_3GRAM).score == pytest.approx(1.0)
        assert sbleu(SOURCE, SOURCE, [], WEIGHTS_3GRAM).score == pytest.approx(1.0)

    def test_eve_perfect(self):
        """Test Eve decoding exactly what Bob decoded leaves nothing secure"""
        assert sbleu(SOURCE, BOB, BOB, WEIGHTS_1GRAM).score == 0.0

    def test_disjoint(self):
        """Test no shared words scores 0"""
        assert bleu(SOURCE, ['x', 'y', 'z'], WEIGHTS_1GRAM).score == 0.0

    def test_brevity_penalty(self):
        """Test a short candidate pays exp(1 - l_s / l_hat)"""
        report = bleu(SOURCE, ['weather', 'is'], WEIGHTS_1GRAM)
        assert report.penalty == pytest.approx(1 - 4 / 2)
        assert report.score == pytest.approx(np.exp(-1.0))

    def test_empty_candidate(self):
        """Test an empty decode scores 0 with a flag"""
        report = bleu(SOURCE, [], WEIGHTS_1GRAM)
        assert report.score == 0.0
        assert report.flag == 'empty_candidate'

    def test_empty_reference(self):
        """Test an empty reference is rejected"""
        with pytest.raises(ContractViolationError):
            bleu([], BOB, WEIGHTS_1GRAM)

    @pytest.mark.parametrize('weights', [{1: 0.5}, {1: 1.2, 2: -0.2}, {}])
    def test_bad_weights(self, weights):
        """Test weights must be non-negative and sum to 1"""
        with pytest.raises(ContractViolationError):
            bleu(SOURCE, BOB, weights)

    def test_mixed_weights(self):
        """Test a two-order profile is the weighted geometric mean"""
        report = bleu(SOURCE, BOB, {1: 0.5, 2: 0.5})
        assert report.per_n == {1: pytest.approx(0.75), 2: pytest.approx(1 / 3)}
        assert report.score == pytest.approx(np.sqrt(0.75 / 3))

    def test_weights_for(self):
        """Test single-order profiles"""
        assert weights_for(3) == WEIGHTS_3GRAM


class TestScoreProperties:
    """Randomized properties over 10^4 triples"""

    def test_bounds_and_security(self):
        """Test 0 <= S-BLEU <= BLEU <= 1 for every order"""
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            s, s_b, s_e = _random_sentence(rng), _random_sentence(rng), _random_sentence(rng, low=0)
            for weights in (WEIGHTS_1GRAM, WEIGHTS_3GRAM):
                reliability = bleu(s, s_b, weights).score
                security = sbleu(s, s_b, s_e, weights).score
                assert 0.0 <= security <= reliability + 1e-12
                assert reliability <= 1.0 + 1e-12

    def test_security_monotone_in_eve(self):
        """Test removing words from Eve's decode never lowers S-BLEU"""
        rng = np.random.default_rng(1)
        for _ in range(500):
            s, s_b, s_e = _random_sentence(rng), _random_sentence(rng), _random_sentence(rng)
            shorter = s_e[:-1]
            assert sbleu(s, s_b, shorter, WEIGHTS_1GRAM).score >= sbleu(s, s_b, s_e, WEIGHTS_1GRAM).score - 1e-12


class TestCorpusScore:
    """Test corpus_score"""

    def test_repeated_example(self):
        """Test ten copies of the worked example keep 0.75 / 0.5"""
        triples = [(SOURCE, BOB, EVE)] * 10
        assert corpus_score(triples, WEIGHTS_1GRAM).score == pytest.approx(0.75)
        report = corpus_score(triples, WEIGHTS_1GRAM, metric='sbleu')
        assert report.score == pytest.approx(0.5)
        assert report.count == 10

    def test_macro_average(self):
        """Test the corpus score is the mean of sentence scores"""
        triples = [(SOURCE, BOB, EVE), (SOURCE, SOURCE, EVE)]
        assert corpus_score(triples, WEIGHTS_1GRAM).score == pytest.approx((0.75 + 1.0) / 2)

    def test_empty_candidates_counted(self):
        """Test empty decodes are tallied"""
        report = corpus_score([(SOURCE, [], EVE), (SOURCE, BOB, EVE)], WEIGHTS_1GRAM)
        assert report.extra['empty_candidates'] == 1.0
        assert report.score == pytest.approx(0.375)

    def test_no_triples(self):
        """Test an empty corpus is rejected"""
        with pytest.raises(ContractViolationError):
            corpus_score([], WEIGHTS_1GRAM)

    def test_unknown_metric(self):
        """Test only bleu and sbleu are known"""
        with pytest.raises(ContractViolationError):
            corpus_score([(SOURCE, BOB, EVE)], WEIGHTS_1GRAM, metric='meteor')


class TestScoreFiles:
    """Test score_files"""

    def test_worked_example(self, worked_example_files, temp_dir):
        """Test corpus means and the per-sentence CSV"""
        out_csv = os.path.join(temp_dir, 'scores', 'scores.csv')
        means = score_files(
            worked_example_files['src'], worked_example_files['bob'], worked_example_files['eve'], out_csv
        )

        assert means['bleu_1'] == pytest.approx(0.75)
        assert means['sbleu_1'] == pytest.approx(0.5)
        with open(out_csv, newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == SCORE_COLUMNS
        assert rows[0]['sentence_id'] == '0'

    def test_normalizes_text(self, temp_dir):
        """Test casing and punctuation do not affect scores"""
        paths = {}
        for name, line in [('src', 'Weather is good today.'), ('bob', 'weather IS nice, today'), ('eve', 'Weather good!')]:
            paths[name] = Path(temp_dir) / f'{name}.txt'
            paths[name].write_text(line + '\n', encoding='utf-8')

        means = score_files(str(paths['src']), str(paths['bob']), str(paths['eve']))
        assert means['sbleu_1'] == pytest.approx(0.5)

    def test_misaligned(self, worked_example_files):
        """Test files with different line counts are rejected"""
        with open(worked_example_files['bob'], 'a', encoding='utf-8') as f:
            f.write('extra line\n')

        with pytest.raises(ContractViolationError, match='line-aligned'):
            score_files(worked_example_files['src'], worked_example_files['bob'], worked_example_files['eve'])
