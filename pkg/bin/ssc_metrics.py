#!/usr/bin/env python3
"""
SSC Metrics
Reliability (BLEU) and security (S-BLEU) scores at sentence and corpus level.

S-BLEU only credits the n-grams Bob recovered that Eve did not:
    f̄_n = Σ_k min([C_k(ŝ_B) - C_k(ŝ_E)]^+, C_k(s)) / Σ_k C_k(ŝ_B)
Both scores share the brevity term min(1 - l_s / l_ŝ, 0) in the log domain.
"""

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ssc_corpus import tokenize
from ssc_errors import ContractViolationError

logger = logging.getLogger(__name__)

WEIGHTS_1GRAM = {1: 1.0}
WEIGHTS_3GRAM = {3: 1.0}
WEIGHT_SUM_TOLERANCE = 1e-9
SCORE_COLUMNS = ["sentence_id", "bleu_1", "bleu_3", "sbleu_1", "sbleu_3"]


def weights_for(n: int) -> Dict[int, float]:
    """Single-order profile: u_n = 1, all other orders 0."""
    return {n: 1.0}


@dataclass
class NgramProfile:
    n: int
    counts: Counter

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class ScoreReport:
    """One BLEU or S-BLEU result; score = exp(penalty + Σ u_n log f_n)."""

    score: float
    per_n: Dict[int, float]
    penalty: float
    weights: Dict[int, float]
    flag: Optional[str] = None
    count: int = 1
    extra: Dict[str, float] = field(default_factory=dict)


def ngram_counts(tokens: Sequence[str], n: int) -> NgramProfile:
    """Sliding-window n-gram counts; empty when the sentence is shorter than n."""
    if n < 1:
        raise ContractViolationError(f"n-gram order must be >= 1, got {n}")
    counts = Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))
    return NgramProfile(n=n, counts=counts)


def _check_weights(weights: Dict[int, float]) -> Dict[int, float]:
    used = {int(n): float(u) for n, u in weights.items() if u != 0}
    if not used:
        raise ContractViolationError("Weight profile has no non-zero order")
    if any(u < 0 for u in used.values()):
        raise ContractViolationError(f"Weights must be non-negative: {weights}")
    if abs(sum(used.values()) - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ContractViolationError(f"Weights must sum to 1, got {sum(used.values())}")
    return used


def _brevity_penalty(reference_len: int, candidate_len: int) -> float:
    return min(1.0 - reference_len / candidate_len, 0.0)


def _combine(precisions: Dict[int, float], penalty: float, weights: Dict[int, float]) -> float:
    if any(precisions[n] <= 0 for n in weights):
        return 0.0
    return math.exp(penalty + sum(u * math.log(precisions[n]) for n, u in weights.items()))


def _empty_report(weights: Dict[int, float]) -> ScoreReport:
    return ScoreReport(score=0.0, per_n={n: 0.0 for n in weights}, penalty=0.0, weights=weights, flag="empty_candidate")


def bleu(s: Sequence[str], s_hat: Sequence[str], weights: Dict[int, float]) -> ScoreReport:
    """Clipped modified precision of candidate s_hat against reference s.

    Args:
        s: Reference words (what Alice sent)
        s_hat: Candidate words (what a receiver decoded)
        weights: {n: u_n} profile summing to 1

    Returns:
        ScoreReport; score 0 with flag "empty_candidate" when s_hat is empty
    """
    weights = _check_weights(weights)
    if not s:
        raise ContractViolationError("Reference sentence is empty")
    if not s_hat:
        return _empty_report(weights)

    precisions = {}
    for n in weights:
        candidate = ngram_counts(s_hat, n).counts
        reference = ngram_counts(s, n).counts
        total = sum(candidate.values())
        matched = sum(min(count, reference[gram]) for gram, count in candidate.items())
        precisions[n] = matched / total if total else 0.0

    penalty = _brevity_penalty(len(s), len(s_hat))
    return ScoreReport(score=_combine(precisions, penalty, weights), per_n=precisions, penalty=penalty, weights=weights)


def sbleu(
    s: Sequence[str], s_hat_B: Sequence[str], s_hat_E: Sequence[str], weights: Dict[int, float]
) -> ScoreReport:
    """Secure score: BLEU of Bob's decode counting only n-grams Eve missed."""
    weights = _check_weights(weights)
    if not s:
        raise ContractViolationError("Reference sentence is empty")
    if not s_hat_B:
        return _empty_report(weights)

    precisions = {}
    for n in weights:
        bob = ngram_counts(s_hat_B, n).counts
        eve = ngram_counts(s_hat_E, n).counts
        reference = ngram_counts(s, n).counts
        total = sum(bob.values())
        secured = sum(min(max(count - eve[gram], 0), reference[gram]) for gram, count in bob.items())
        precisions[n] = secured / total if total else 0.0

    penalty = _brevity_penalty(len(s), len(s_hat_B))
    return ScoreReport(score=_combine(precisions, penalty, weights), per_n=precisions, penalty=penalty, weights=weights)


Triple = Tuple[Sequence[str], Sequence[str], Sequence[str]]


def corpus_score(triples: Sequence[Triple], weights: Dict[int, float], metric: str = "bleu") -> ScoreReport:
    """Macro-average of sentence scores over (s, ŝ_B, ŝ_E) triples."""
    if not triples:
        raise ContractViolationError("corpus_score() needs at least one sentence triple")
    if metric == "bleu":
        reports = [bleu(s, s_b, weights) for s, s_b, _ in triples]
    elif metric == "sbleu":
        reports = [sbleu(s, s_b, s_e, weights) for s, s_b, s_e in triples]
    else:
        raise ContractViolationError(f"Unknown metric '{metric}' (expected 'bleu' or 'sbleu')")

    count = len(reports)
    used = reports[0].weights
    return ScoreReport(
        score=sum(r.score for r in reports) / count,
        per_n={n: sum(r.per_n[n] for r in reports) / count for n in used},
        penalty=sum(r.penalty for r in reports) / count,
        weights=used,
        count=count,
        extra={"empty_candidates": float(sum(r.flag == "empty_candidate" for r in reports))},
    )


def _read_lines(path: str) -> List[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def score_files(src_path: str, bob_path: str, eve_path: str, out_csv: Optional[str] = None) -> Dict[str, float]:
    """Score three line-aligned text files.

    Args:
        src_path: Sentences Alice sent
        bob_path: Bob's reconstructions
        eve_path: Eve's reconstructions
        out_csv: Optional per-sentence CSV (sentence_id, bleu_1, bleu_3, sbleu_1, sbleu_3)

    Returns:
        Corpus means keyed by the CSV column names
    """
    sources, bobs, eves = _read_lines(src_path), _read_lines(bob_path), _read_lines(eve_path)
    if not (len(sources) == len(bobs) == len(eves)):
        raise ContractViolationError(
            f"Files are not line-aligned: {len(sources)} source, {len(bobs)} bob, {len(eves)} eve lines"
        )
    if not sources:
        raise ContractViolationError(f"No sentences in {src_path}")

    rows = []
    for idx, (src, bob_line, eve_line) in enumerate(zip(sources, bobs, eves)):
        s, s_b, s_e = tokenize(src), tokenize(bob_line), tokenize(eve_line)
        if not s:
            raise ContractViolationError(f"Empty source sentence on line {idx + 1} of {src_path}")
        rows.append(
            {
                "sentence_id": idx,
                "bleu_1": bleu(s, s_b, WEIGHTS_1GRAM).score,
                "bleu_3": bleu(s, s_b, WEIGHTS_3GRAM).score,
                "sbleu_1": sbleu(s, s_b, s_e, WEIGHTS_1GRAM).score,
                "sbleu_3": sbleu(s, s_b, s_e, WEIGHTS_3GRAM).score,
            }
        )

    if out_csv:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=SCORE_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        logger.info(f"Scores written: {out_csv}")

    return {column: sum(row[column] for row in rows) / len(rows) for column in SCORE_COLUMNS[1:]}
