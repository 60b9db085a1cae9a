import csv
import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from unmtlab import evaluation as ev


def toks(line):
    return line.split()


# ---------------------------------------------------------------------------
# golden fixture: 10 sentence pairs, expected values derived with an exact
# Fraction-arithmetic oracle (re-derived live below before asserting)

GOLDEN = [
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("the the the the", "the cat"),
    ("b a d c", "a b c d"),
    ("one two three", "one two three four five"),
    ("alpha beta gamma delta epsilon", "alpha beta gamma"),
    ("x y", "p q r"),
    ("", "something here"),
    ("w w v v", "w v w v"),
    ("m n o p q r", "m n o p q r s"),
    ("s t u", "u t s"),
]
# frozen from the oracle: match/total per n = 30/37, 15/28, 10/19, 6/11;
# hyp_len 37, ref_len 39, BP = exp(1 - 39/37)
GOLDEN_BLEU = 56.2974926981
GOLDEN_BP = 0.9473808953
GOLDEN_PRECISIONS = (30 / 37, 15 / 28, 10 / 19, 6 / 11)


def fraction_oracle(pairs):
    """Independent corpus BLEU: exact counting, floats only at the very end."""
    match = [0] * 4
    total = [0] * 4
    hlen = rlen = 0
    for hyp, ref in pairs:
        h, r = toks(hyp), toks(ref)
        hlen += len(h)
        rlen += len(r)
        for n in range(1, 5):
            hc = Counter(tuple(h[i : i + n]) for i in range(len(h) - n + 1))
            rc = Counter(tuple(r[i : i + n]) for i in range(len(r) - n + 1))
            match[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            total[n - 1] += max(0, len(h) - n + 1)
    precisions = [Fraction(m, t) if t else Fraction(0) for m, t in zip(match, total)]
    bp = 1.0 if hlen > rlen else math.exp(1 - Fraction(rlen, hlen))
    if all(p > 0 for p in precisions):
        bleu = bp * math.exp(sum(math.log(p) for p in precisions) / 4) * 100
    else:
        bleu = 0.0
    return bleu, bp, [float(p) for p in precisions]


def test_corpus_bleu_matches_golden_fixture():
    report = ev.corpus_bleu([toks(h) for h, _ in GOLDEN], [toks(r) for _, r in GOLDEN])
    oracle_bleu, oracle_bp, oracle_p = fraction_oracle(GOLDEN)
    assert abs(report.bleu - GOLDEN_BLEU) <= 0.01
    assert abs(report.bleu - oracle_bleu) < 1e-9
    assert abs(report.bp - GOLDEN_BP) < 1e-9
    assert np.allclose(report.precisions, GOLDEN_PRECISIONS, atol=1e-12)
    assert np.allclose(report.precisions, oracle_p, atol=1e-12)
    assert report.hyp_len == 37 and report.ref_len == 39


def test_identity_hypotheses_score_100():
    refs = [toks("a b c d e"), toks("f g h")]
    report = ev.corpus_bleu(refs, refs)
    assert report.bleu == 100.0
    assert report.bp == 1.0
    assert report.precisions == (1.0, 1.0, 1.0, 1.0)


def test_clipping_case_scores_zero():
    report = ev.corpus_bleu([toks("the the the the")], [toks("the cat")])
    assert report.precisions[0] == 0.25  # clipped: min(4, 1) / 4
    assert report.precisions[1] == 0.0
    assert report.bleu == 0.0
    assert report.bp == 1.0  # hyp longer than ref


def test_scrambled_signature_case():
    # perfect unigrams, broken phrases: the scrambled-translation fingerprint
    report = ev.corpus_bleu([toks("b a d c")], [toks("a b c d")])
    assert report.precisions[0] == 1.0
    assert report.precisions[1] == 0.0
    assert report.bleu == 0.0
    assert report.individual[0] == 100.0
    assert report.individual[1] == 0.0


def test_empty_hypothesis_contributes_lengths_only():
    report = ev.corpus_bleu([[], toks("a b")], [toks("a b"), toks("a b")])
    assert report.hyp_len == 2
    assert report.ref_len == 4
    assert report.bleu > 0 or report.bleu == 0.0  # no crash; lengths tallied
    single = ev.corpus_bleu([[]], [toks("a b")])
    assert single.bleu == 0.0 and single.bp == 0.0


def test_corpus_bleu_rejects_mismatch():
    with pytest.raises(ev.EvalError):
        ev.corpus_bleu([toks("a")], [toks("a"), toks("b")])
    with pytest.raises(ev.EvalError):
        ev.corpus_bleu([], [])


def test_individual_ngram_identity_and_degenerate():
    refs = [toks("a b c d")]
    for n in (1, 2, 3, 4):
        assert ev.individual_ngram_bleu(refs, refs, n) == 100.0
    short = ev.corpus_bleu([toks("a b")], [toks("a b")])
    assert short.individual[2] == 0.0 and short.individual_degenerate[2]
    assert short.individual_degenerate[3]
    assert not short.individual_degenerate[0]
    with pytest.raises(ev.EvalError):
        ev.individual_ngram_bleu(refs, refs, 5)


def test_permutation_sensitivity_property():
    # any non-identity permutation of distinct tokens: BLEU-1 = 100 * BP and
    # corpus BLEU strictly below it
    rng = np.random.default_rng(31)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        ref = [f"t{i}" for i in range(n)]
        perm = rng.permutation(n)
        while (perm == np.arange(n)).all():
            perm = rng.permutation(n)
        hyp = [ref[i] for i in perm]
        report = ev.corpus_bleu([hyp], [ref])
        assert report.individual[0] == pytest.approx(100.0 * report.bp)
        assert report.bleu < report.individual[0]


def test_delta_table_arithmetic():
    assert ev.delta_table([10.0], [11.0]) == [pytest.approx(10.0)]
    assert ev.delta_table([5.0, 5.0], [5.0, 5.0]) == [0.0, 0.0]
    assert ev.delta_table([0.0], [3.0]) == [None]
    with pytest.raises(ev.EvalError):
        ev.delta_table([1.0], [1.0, 2.0])


def test_delta_table_reproduces_published_format_row():
    # published improvement row (0.00, 4.50, 8.85, 11.67) recovered from any
    # consistent baseline/retrained score pair
    base = [52.0, 27.0, 16.0, 9.6]
    deltas = (0.00, 4.50, 8.85, 11.67)
    retrained = [b * (1 + d / 100.0) for b, d in zip(base, deltas)]
    out = ev.delta_table(base, retrained)
    assert all(abs(o - d) < 1e-9 for o, d in zip(out, deltas))
    assert f"{out[0]:.2f}" == "0.00"


# ---------------------------------------------------------------------------
# paired bootstrap


def test_bootstrap_identical_systems_p_one():
    hyps = [toks("a b c"), toks("d e f"), toks("g h")]
    refs = [toks("a b c"), toks("d x f"), toks("g h i")]
    res = ev.paired_bootstrap(hyps, hyps, refs, samples=200, seed=1)
    assert res.p_value == 1.0
    assert not res.significant
    assert res.wins_b == 0


def test_bootstrap_perfect_system_wins_always():
    refs = [toks("a b c d"), toks("e f g h"), toks("i j k l")]
    garbage = [toks("z z z z")] * 3
    res = ev.paired_bootstrap(garbage, refs, refs, samples=1000, seed=2)
    assert res.p_value == 0.0
    assert res.significant
    assert res.wins_b == 1000
    assert res.bleu_b == 100.0


def test_bootstrap_exhaustive_matches_bruteforce_oracle():
    # 3-sentence corpus: enumerate all 27 index tuples with direct rescoring
    refs = [toks("a b c d"), toks("e f g h"), toks("i j k")]
    hyps_a = [toks("a b d c"), toks("e f g h"), toks("z z z")]
    hyps_b = [toks("a b c d"), toks("e f h g"), toks("i j k")]
    n = len(refs)
    wins = 0
    tot = 0
    for idx in itertools.product(range(n), repeat=n):
        ba = ev.corpus_bleu([hyps_a[i] for i in idx], [refs[i] for i in idx]).bleu
        bb = ev.corpus_bleu([hyps_b[i] for i in idx], [refs[i] for i in idx]).bleu
        tot += 1
        if bb <= ba:
            wins += 1
    oracle_p = wins / tot
    res = ev.paired_bootstrap(hyps_a, hyps_b, refs, samples=1, exhaustive=True)
    assert res.samples == 27
    assert res.p_value == oracle_p


@pytest.mark.parametrize("size", [2, 4])
def test_bootstrap_exhaustive_oracle_other_sizes(size):
    rng = np.random.default_rng(40 + size)
    vocab = [f"w{i}" for i in range(6)]
    refs = [[vocab[int(i)] for i in rng.integers(0, 6, size=4)] for _ in range(size)]
    hyps_a = [list(r) for r in refs]
    hyps_a[0] = list(reversed(hyps_a[0]))
    hyps_b = [list(r) for r in refs]
    n = size
    wins = sum(
        1
        for idx in itertools.product(range(n), repeat=n)
        if ev.corpus_bleu([hyps_b[i] for i in idx], [refs[i] for i in idx]).bleu
        <= ev.corpus_bleu([hyps_a[i] for i in idx], [refs[i] for i in idx]).bleu
    )
    oracle_p = wins / n**n
    res = ev.paired_bootstrap(hyps_a, hyps_b, refs, samples=1, exhaustive=True)
    assert res.p_value == oracle_p


def test_bootstrap_deterministic_and_validated():
    refs = [toks("a b c"), toks("d e f")]
    hyps = [toks("a b"), toks("d e f")]
    r1 = ev.paired_bootstrap(hyps, refs, refs, samples=300, seed=77)
    r2 = ev.paired_bootstrap(hyps, refs, refs, samples=300, seed=77)
    assert r1 == r2
    with pytest.raises(ev.EvalError):
        ev.paired_bootstrap(hyps, refs, refs, samples=0)
    with pytest.raises(ev.EvalError):
        ev.paired_bootstrap(hyps, refs[:1], refs, samples=10)


# ---------------------------------------------------------------------------
# scramble diagnostics


def test_scramble_hand_counted_example():
    d = ev.scramble_diagnose(toks("b a d c"), toks("a b c d"))
    assert d.p1 == 1.0  # (4+1)/(4+1)
    assert d.p2 == 0.25  # (0+1)/(3+1)
    assert d.flagged


def test_scramble_identity_not_flagged():
    d = ev.scramble_diagnose(toks("a b c d"), toks("a b c d"))
    assert not d.flagged
    assert d.p1 == 1.0 and d.p2 == 1.0


def test_scramble_wrong_words_not_flagged():
    d = ev.scramble_diagnose(toks("x y z w"), toks("a b c d"))
    assert not d.flagged
    assert d.p1 == 0.2  # (0+1)/(4+1)


def test_scramble_empty_hypothesis_degenerate():
    d = ev.scramble_diagnose([], toks("a b"))
    assert d.degenerate and not d.flagged


def test_scramble_requires_tau_order():
    with pytest.raises(ev.EvalError):
        ev.scramble_diagnose(toks("a"), toks("a"), tau1=0.3, tau2=0.6)


def test_scramble_fraction_counts_flags():
    hyps = [toks("b a d c"), toks("a b c d"), []]
    refs = [toks("a b c d")] * 3
    s = ev.scramble_fraction(hyps, refs)
    assert s.fraction == pytest.approx(1 / 3)
    assert len(s.sentences) == 3


# ---------------------------------------------------------------------------
# heatmap export


def test_heatmap_single_cell(tmp_path):
    path = tmp_path / "h.csv"
    out = ev.export_heatmap(np.array([[1.0]]), ["src0"], ["tgt0"], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["", "src0"]
    assert rows[1] == ["tgt0", "1.000000"]
    assert out.mean_row_entropy == 0.0


def test_heatmap_roundtrip_within_tolerance(tmp_path):
    rng = np.random.default_rng(55)
    raw = rng.random((4, 6))
    attn = raw / raw.sum(axis=1, keepdims=True)
    src = [f"s{i}" for i in range(6)]
    tgt = [f"t{i}" for i in range(4)]
    path = tmp_path / "attn.csv"
    ev.export_heatmap(attn, src, tgt, path)
    rows = list(csv.reader(path.open()))
    parsed = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    assert np.max(np.abs(parsed - attn)) < 5e-7
    assert rows[0][1:] == src
    assert [r[0] for r in rows[1:]] == tgt


def test_heatmap_rejects_dim_mismatch(tmp_path):
    with pytest.raises(ev.EvalError):
        ev.export_heatmap(np.ones((2, 2)) / 2, ["a"], ["b", "c"], tmp_path / "x.csv")


def test_row_entropy_uniform_and_onehot():
    S = 7
    uniform = np.full((3, S), 1.0 / S)
    assert ev.attention_row_entropy(uniform) == pytest.approx(math.log(S))
    onehot = np.eye(4)
    assert ev.attention_row_entropy(onehot) == 0.0
    assert ev.attention_row_entropy(np.zeros((0, 5))) == 0.0


def test_report_format_keys_and_determinism():
    refs = [toks("a b c d")]
    report = ev.corpus_bleu(refs, refs)
    text = ev.format_report(report, 0.0)
    keys = [line.split(" = ")[0] for line in text.strip().splitlines()]
    assert keys == list(ev.REPORT_KEYS)
    assert "bleu = 100.00" in text
    assert text == ev.format_report(ev.corpus_bleu(refs, refs), 0.0)
