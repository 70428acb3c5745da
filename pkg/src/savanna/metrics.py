"""Reference implementations of chrF, BLEU, CER and WER.

All scoring functions expect inputs already normalized with the metric
profile from :mod:`savanna.textnorm`.  Each metric exposes a sufficient
statistics form so that corpus-level aggregation can pool counts rather
than averaging sentence scores.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

Smoothing = Literal["none", "add_one_for_sentence"]
AggregationScheme = Literal["mean_of_sentences", "corpus_level"]


@dataclass(frozen=True)
class ChrfParams:
    max_char_ngram: int = 6
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.max_char_ngram < 1:
            raise ValueError("max_char_ngram must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class BleuParams:
    max_ngram: int = 4
    smoothing: Smoothing = "add_one_for_sentence"

    def __post_init__(self) -> None:
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")


@dataclass
class ChrfStatistics:
    """Per-order (matched, hypothesis total, reference total) counts."""

    matched: list[int]
    hyp_total: list[int]
    ref_total: list[int]

    def add(self, other: "ChrfStatistics") -> None:
        for i in range(len(self.matched)):
            self.matched[i] += other.matched[i]
            self.hyp_total[i] += other.hyp_total[i]
            self.ref_total[i] += other.ref_total[i]


@dataclass
class BleuStatistics:
    """Clipped match and total counts per order, plus lengths."""

    clipped: list[int]
    totals: list[int]
    hyp_len: int
    ref_len: int

    def add(self, other: "BleuStatistics") -> None:
        for i in range(len(self.clipped)):
            self.clipped[i] += other.clipped[i]
            self.totals[i] += other.totals[i]
        self.hyp_len += other.hyp_len
        self.ref_len += other.ref_len


@dataclass
class SentenceScores:
    chrf: float
    bleu: float
    cer: float
    wer: float


@dataclass
class MetricReport:
    direction: tuple[str, str]
    per_sentence: list[SentenceScores] = field(default_factory=list)
    aggregates: SentenceScores | None = None


def _char_ngrams(text: str, n: int) -> Counter:
    chars = "".join(text.split())  # spaces never participate in n-grams
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def chrf_statistics(hypothesis: str, reference: str, params: ChrfParams = ChrfParams()) -> ChrfStatistics:
    matched, hyp_total, ref_total = [], [], []
    for n in range(1, params.max_char_ngram + 1):
        hyp_counts = _char_ngrams(hypothesis, n)
        ref_counts = _char_ngrams(reference, n)
        matched.append(sum(min(c, ref_counts[g]) for g, c in hyp_counts.items()))
        hyp_total.append(sum(hyp_counts.values()))
        ref_total.append(sum(ref_counts.values()))
    return ChrfStatistics(matched, hyp_total, ref_total)


def chrf_from_statistics(stats: ChrfStatistics, beta: float = 2.0) -> float:
    precisions, recalls = [], []
    for m, h, r in zip(stats.matched, stats.hyp_total, stats.ref_total):
        if r == 0:
            continue  # orders with no reference n-grams are skipped
        precisions.append(m / h if h > 0 else 0.0)
        recalls.append(m / r)
    if not precisions:
        # No reference n-grams at any order: both sides empty scores 1.
        return 1.0 if sum(stats.hyp_total) == 0 else 0.0
    p = sum(precisions) / len(precisions)
    r = sum(recalls) / len(recalls)
    if p + r == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def chrf(hypothesis: str, reference: str, params: ChrfParams = ChrfParams()) -> float:
    """Character n-gram F-score in [0, 1]."""
    hyp_chars = "".join(hypothesis.split())
    ref_chars = "".join(reference.split())
    if not hyp_chars and not ref_chars:
        return 1.0
    if not hyp_chars or not ref_chars:
        return 0.0
    return chrf_from_statistics(chrf_statistics(hypothesis, reference, params), params.beta)


def _word_ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_statistics(hypothesis: str, reference: str, params: BleuParams = BleuParams()) -> BleuStatistics:
    hyp_tokens = hypothesis.split()
    ref_tokens = reference.split()
    clipped, totals = [], []
    for n in range(1, params.max_ngram + 1):
        hyp_counts = _word_ngrams(hyp_tokens, n)
        ref_counts = _word_ngrams(ref_tokens, n)
        clipped.append(sum(min(c, ref_counts[g]) for g, c in hyp_counts.items()))
        totals.append(sum(hyp_counts.values()))
    return BleuStatistics(clipped, totals, len(hyp_tokens), len(ref_tokens))


def bleu_from_statistics(stats: BleuStatistics, smoothing: Smoothing = "none") -> float:
    if stats.hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n, (clipped, total) in enumerate(zip(stats.clipped, stats.totals), start=1):
        if smoothing == "add_one_for_sentence" and n >= 2:
            p = (clipped + 1) / (total + 1)
        else:
            p = clipped / total if total > 0 else 0.0
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    geo_mean = math.exp(log_sum / len(stats.clipped))
    bp = math.exp(min(0.0, 1.0 - stats.ref_len / stats.hyp_len))
    return 100.0 * geo_mean * bp


def bleu(hypothesis: str, reference: str, params: BleuParams = BleuParams()) -> float:
    """BLEU in [0, 100]; sentence-level smoothing per ``params.smoothing``."""
    return bleu_from_statistics(bleu_statistics(hypothesis, reference, params), params.smoothing)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit costs (two-row dynamic program)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y))
            )
        previous = current
    return previous[-1]


def cer(hypothesis: str, reference: str) -> float:
    """Character error rate: edit distance over reference length (may exceed 1)."""
    if len(reference) == 0:
        raise ValueError("undefined denominator: empty reference")
    return edit_distance(hypothesis, reference) / len(reference)


def wer(hypothesis: str, reference: str) -> float:
    """Word error rate over whitespace-separated tokens."""
    ref_tokens = reference.split()
    if not ref_tokens:
        raise ValueError("undefined denominator: reference has no tokens")
    return edit_distance(hypothesis.split(), ref_tokens) / len(ref_tokens)


def corpus_chrf(stats: Iterable[ChrfStatistics], beta: float = 2.0) -> float:
    pooled = None
    for s in stats:
        if pooled is None:
            pooled = ChrfStatistics(list(s.matched), list(s.hyp_total), list(s.ref_total))
        else:
            pooled.add(s)
    if pooled is None:
        raise ValueError("cannot aggregate an empty list")
    return chrf_from_statistics(pooled, beta)


def corpus_bleu(stats: Iterable[BleuStatistics]) -> float:
    pooled = None
    for s in stats:
        if pooled is None:
            pooled = BleuStatistics(list(s.clipped), list(s.totals), s.hyp_len, s.ref_len)
        else:
            pooled.add(s)
    if pooled is None:
        raise ValueError("cannot aggregate an empty list")
    return bleu_from_statistics(pooled, smoothing="none")


def corpus_error_rate(distances_and_ref_lens: Iterable[tuple[int, int]]) -> float:
    """Summed edit distances over summed reference lengths."""
    total_dist = total_ref = 0
    count = 0
    for dist, ref_len in distances_and_ref_lens:
        total_dist += dist
        total_ref += ref_len
        count += 1
    if count == 0:
        raise ValueError("cannot aggregate an empty list")
    if total_ref == 0:
        raise ValueError("undefined denominator: zero total reference length")
    return total_dist / total_ref


def aggregate(per_sentence_scores: Sequence, scheme: AggregationScheme = "mean_of_sentences"):
    """Aggregate per-sentence values.

    ``mean_of_sentences`` takes a list of floats and returns their arithmetic
    mean.  ``corpus_level`` takes a list of :class:`ChrfStatistics`,
    :class:`BleuStatistics` or ``(distance, ref_len)`` tuples and recomputes
    the score from pooled counts.
    """
    if len(per_sentence_scores) == 0:
        raise ValueError("cannot aggregate an empty list")
    if scheme == "mean_of_sentences":
        return sum(per_sentence_scores) / len(per_sentence_scores)
    if scheme == "corpus_level":
        first = per_sentence_scores[0]
        if isinstance(first, ChrfStatistics):
            return corpus_chrf(per_sentence_scores)
        if isinstance(first, BleuStatistics):
            return corpus_bleu(per_sentence_scores)
        return corpus_error_rate(per_sentence_scores)
    raise ValueError(f"unknown aggregation scheme: {scheme}")
