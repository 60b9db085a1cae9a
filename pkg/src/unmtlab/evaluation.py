"""Corpus BLEU (multi-bleu semantics), n-gram decomposition, paired bootstrap
resampling, scrambled-output diagnostics and attention heatmap export.

Conventions follow multi-bleu.perl: clipped modified n-gram precisions
aggregated over the corpus for n=1..4, brevity penalty min(1, e^(1-r/h)),
geometric mean, zero score if any precision is zero, no corpus-level
smoothing. Sentence-level scramble diagnostics use add-one smoothing because
zero-heavy sentence precisions carry no signal.
"""
from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "EvalError",
    "BleuReport",
    "BootstrapResult",
    "ScrambleDiagnostic",
    "ScrambleSummary",
    "HeatmapExport",
    "corpus_bleu",
    "individual_ngram_bleu",
    "delta_table",
    "paired_bootstrap",
    "scramble_diagnose",
    "scramble_fraction",
    "attention_row_entropy",
    "export_heatmap",
    "format_report",
]

N_MAX = 4
EXHAUSTIVE_CAP = 200_000


class EvalError(ValueError):
    """Invalid evaluation input (length mismatch, bad order, bad dims)."""


@dataclass(frozen=True)
class BleuReport:
    """Corpus BLEU with its parts, all on multi-bleu conventions.

    bleu and the individual per-order scores are on the 0-100 scale;
    precisions are fractions in [0, 1].
    """

    bleu: float
    precisions: tuple[float, float, float, float]
    bp: float
    hyp_len: int
    ref_len: int
    individual: tuple[float, float, float, float]  # BP * p_n, scaled to 0-100
    individual_degenerate: tuple[bool, bool, bool, bool]  # p_n had zero denominator


@dataclass(frozen=True)
class BootstrapResult:
    samples: int
    wins_b: int
    p_value: float
    significant: bool
    alpha: float
    bleu_a: float
    bleu_b: float


@dataclass(frozen=True)
class ScrambleDiagnostic:
    flagged: bool
    p1: float
    p2: float
    degenerate: bool = False


@dataclass(frozen=True)
class ScrambleSummary:
    fraction: float
    sentences: tuple[ScrambleDiagnostic, ...]


@dataclass(frozen=True)
class HeatmapExport:
    path: str
    mean_row_entropy: float


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _pair_stats(hyp, ref) -> np.ndarray:
    """Per-sentence BLEU sufficient statistics.

    Layout: [match_1, total_1, ..., match_4, total_4, hyp_len, ref_len];
    corpus scores are functions of the columnwise sum, which is what makes
    bootstrap resampling cheap and exactly equivalent to rescoring.
    """
    out = np.zeros(2 * N_MAX + 2)
    for n in range(1, N_MAX + 1):
        hc = _ngram_counts(hyp, n)
        if not hc:
            continue
        rc = _ngram_counts(ref, n)
        match = sum(min(c, rc[g]) for g, c in hc.items())
        out[2 * (n - 1)] = match
        out[2 * (n - 1) + 1] = len(hyp) - n + 1
    out[2 * N_MAX] = len(hyp)
    out[2 * N_MAX + 1] = len(ref)
    return out


def _stats_matrix(hyps, refs) -> np.ndarray:
    if len(hyps) != len(refs):
        raise EvalError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EvalError("empty corpus")
    return np.array([_pair_stats(h, r) for h, r in zip(hyps, refs)])


def _report_from_sums(sums: np.ndarray) -> BleuReport:
    hyp_len = int(sums[2 * N_MAX])
    ref_len = int(sums[2 * N_MAX + 1])
    precisions = []
    degenerate = []
    for n in range(N_MAX):
        total = sums[2 * n + 1]
        degenerate.append(total == 0)
        precisions.append(float(sums[2 * n] / total) if total > 0 else 0.0)
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)
    if all(p > 0 for p in precisions):
        bleu = bp * math.exp(sum(math.log(p) for p in precisions) / N_MAX) * 100.0
    else:
        bleu = 0.0
    individual = tuple(bp * p * 100.0 for p in precisions)
    return BleuReport(
        bleu=bleu,
        precisions=tuple(precisions),
        bp=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
        individual=individual,
        individual_degenerate=tuple(degenerate),
    )


def corpus_bleu(hyps, refs) -> BleuReport:
    """Corpus BLEU of tokenized hypotheses against single references."""
    return _report_from_sums(_stats_matrix(hyps, refs).sum(axis=0))


def individual_ngram_bleu(hyps, refs, n: int) -> float:
    """Single-order BLEU-n: brevity penalty times clipped precision, 0-100."""
    if n not in range(1, N_MAX + 1):
        raise EvalError(f"n must be in 1..{N_MAX}, got {n}")
    return corpus_bleu(hyps, refs).individual[n - 1]


def delta_table(baseline, retrained) -> list[float | None]:
    """Per-order percentage improvements; None where the baseline is zero."""
    if len(baseline) != len(retrained):
        raise EvalError("score lists differ in length")
    out: list[float | None] = []
    for b, r in zip(baseline, retrained):
        out.append(100.0 * (r - b) / b if b > 0 else None)
    return out


def paired_bootstrap(
    hyps_a,
    hyps_b,
    refs,
    samples: int,
    seed: int = 0,
    alpha: float = 0.05,
    exhaustive: bool = False,
) -> BootstrapResult:
    """Paired bootstrap resampling test of "system B beats system A".

    Draws `samples` resamples of sentence indices with replacement (resample
    size = corpus size), scores both systems on the same index multiset, and
    reports p = (#resamples with BLEU_B <= BLEU_A) / samples; ties count
    against significance. With exhaustive=True every one of the n^n index
    tuples is evaluated instead (small corpora only) and `samples`/`seed` are
    ignored.
    """
    if samples < 1 and not exhaustive:
        raise EvalError("need at least one bootstrap sample")
    stats_a = _stats_matrix(hyps_a, refs)
    stats_b = _stats_matrix(hyps_b, refs)
    n = stats_a.shape[0]
    if stats_b.shape[0] != n:
        raise EvalError("system outputs differ in length")

    if exhaustive:
        if n**n > EXHAUSTIVE_CAP:
            raise EvalError(f"exhaustive enumeration infeasible for {n} sentences")
        index_sets = itertools.product(range(n), repeat=n)
        total = n**n
    else:
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, n, size=(samples, n))
        index_sets = (tuple(int(i) for i in row) for row in draws)
        total = samples

    wins_b = 0
    ge_a = 0
    for idx in index_sets:
        rows = list(idx)
        bleu_a = _report_from_sums(stats_a[rows].sum(axis=0)).bleu
        bleu_b = _report_from_sums(stats_b[rows].sum(axis=0)).bleu
        if bleu_b > bleu_a:
            wins_b += 1
        else:
            ge_a += 1
    p = ge_a / total
    return BootstrapResult(
        samples=total,
        wins_b=wins_b,
        p_value=p,
        significant=p < alpha,
        alpha=alpha,
        bleu_a=_report_from_sums(stats_a.sum(axis=0)).bleu,
        bleu_b=_report_from_sums(stats_b.sum(axis=0)).bleu,
    )


def scramble_diagnose(hyp, ref, tau1: float = 0.6, tau2: float = 0.3) -> ScrambleDiagnostic:
    """Flag a hypothesis whose words are right but whose order is wrong.

    Sentence-level unigram/bigram precisions with add-one smoothing; flagged
    iff p1 >= tau1 (words largely correct) and p2 <= tau2 (phrases broken).
    """
    if not tau1 > tau2:
        raise EvalError(f"need tau1 > tau2, got {tau1} <= {tau2}")
    if len(hyp) == 0:
        return ScrambleDiagnostic(flagged=False, p1=0.0, p2=0.0, degenerate=True)
    stats = _pair_stats(hyp, ref)
    p1 = (stats[0] + 1.0) / (stats[1] + 1.0)
    p2 = (stats[2] + 1.0) / (stats[3] + 1.0)
    return ScrambleDiagnostic(flagged=(p1 >= tau1 and p2 <= tau2), p1=float(p1), p2=float(p2))


def scramble_fraction(hyps, refs, tau1: float = 0.6, tau2: float = 0.3) -> ScrambleSummary:
    """Corpus wrapper: fraction of flagged sentences plus per-sentence detail."""
    if len(hyps) != len(refs):
        raise EvalError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EvalError("empty corpus")
    diags = tuple(scramble_diagnose(h, r, tau1, tau2) for h, r in zip(hyps, refs))
    flagged = sum(d.flagged for d in diags)
    return ScrambleSummary(fraction=flagged / len(diags), sentences=diags)


def attention_row_entropy(attn: np.ndarray) -> float:
    """Mean Shannon entropy (nats) of the rows of an attention matrix."""
    attn = np.asarray(attn, dtype=np.float64)
    if attn.size == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(attn > 0, attn * np.log(attn), 0.0)
    return float(-terms.sum(axis=1).mean())


def export_heatmap(attn: np.ndarray, src_tokens, tgt_tokens, path) -> HeatmapExport:
    """Write one attention matrix as CSV; returns the row-entropy summary.

    First row holds the source tokens, first column the target tokens, cells
    are weights with 6 decimals (round-trips within 5e-7).
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 2:
        raise EvalError(f"attention matrix must be 2-D, got shape {attn.shape}")
    if attn.shape != (len(tgt_tokens), len(src_tokens)):
        raise EvalError(
            f"matrix {attn.shape} does not match {len(tgt_tokens)} target x "
            f"{len(src_tokens)} source tokens"
        )
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([""] + list(src_tokens))
        for tok, row in zip(tgt_tokens, attn):
            writer.writerow([tok] + [f"{w:.6f}" for w in row])
    return HeatmapExport(path=str(path), mean_row_entropy=attention_row_entropy(attn))


REPORT_KEYS = (
    "bleu",
    "p1",
    "p2",
    "p3",
    "p4",
    "bp",
    "bleu1",
    "bleu2",
    "bleu3",
    "bleu4",
    "scrambled_fraction",
)


def format_report(report: BleuReport, scrambled_fraction: float) -> str:
    """Fixed-key structured text report (deterministic bytes)."""
    lines = [f"bleu = {report.bleu:.2f}"]
    for n in range(N_MAX):
        lines.append(f"p{n + 1} = {report.precisions[n]:.4f}")
    lines.append(f"bp = {report.bp:.4f}")
    for n in range(N_MAX):
        lines.append(f"bleu{n + 1} = {report.individual[n]:.2f}")
    lines.append(f"scrambled_fraction = {scrambled_fraction:.4f}")
    return "\n".join(lines) + "\n"
