from collections import Counter

import numpy as np
import pytest

from unmtlab import corpus as cp
from conftest import tiny_pair_spec


def test_split_sizes_exact():
    rng = np.random.default_rng(0)
    pairs = [
        (cp.Sentence("src", (4,)), cp.Sentence("trg", (4,))) for _ in range(100)
    ]
    splits = cp.split_corpora(pairs, (0.4, 0.4, 0.1, 0.1), rng)
    assert len(splits.mono_src.sentences) == 40
    assert len(splits.mono_trg.sentences) == 40
    assert len(splits.dev.src) == 10
    assert len(splits.test.src) == 10


def test_split_is_a_partition():
    rng = np.random.default_rng(1)
    pairs = [
        (cp.Sentence("src", (i % 7 + 4,)), cp.Sentence("trg", (i % 7 + 4,)))
        for i in range(50)
    ]
    splits = cp.split_corpora(pairs, (0.5, 0.3, 0.1, 0.1), rng)
    groups = [
        splits.mono_src.pair_ids,
        splits.mono_trg.pair_ids,
        splits.dev.pair_ids,
        splits.test.pair_ids,
    ]
    all_ids = [i for g in groups for i in g]
    assert sorted(all_ids) == list(range(50))
    for i, a in enumerate(groups):
        for b in groups[i + 1 :]:
            assert not (set(a) & set(b))


def test_split_deterministic_and_hygienic():
    pairs = [
        (cp.Sentence("src", (i % 5 + 4,)), cp.Sentence("trg", (i % 5 + 4,)))
        for i in range(40)
    ]
    s1 = cp.split_corpora(pairs, (0.4, 0.4, 0.1, 0.1), np.random.default_rng(9))
    s2 = cp.split_corpora(pairs, (0.4, 0.4, 0.1, 0.1), np.random.default_rng(9))
    assert s1.mono_src.pair_ids == s2.mono_src.pair_ids
    assert s1.test.pair_ids == s2.test.pair_ids
    # unsupervised hygiene: no pair contributes both sides to training
    assert not (set(s1.mono_src.pair_ids) & set(s1.mono_trg.pair_ids))
    assert s1.mono_src.provenance == "train-mono-src"


def test_split_rejects_bad_fractions():
    pairs = [(cp.Sentence("src", (4,)), cp.Sentence("trg", (4,)))] * 10
    with pytest.raises(cp.CorpusError):
        cp.split_corpora(pairs, (0.5, 0.5, 0.2, 0.1), np.random.default_rng(0))
    with pytest.raises(cp.CorpusError):
        # 2 pairs cannot fill 4 non-empty splits
        cp.split_corpora(pairs[:2], (0.25, 0.25, 0.25, 0.25), np.random.default_rng(0))


def test_generate_degenerate_grammar_yields_identical_pairs():
    spec = cp.LanguagePairSpec(
        src_lang="src",
        trg_lang="trg",
        templates=(("noun",),),
        categories={"noun": ("only",)},
        cipher={"only": "lonely"},
    )
    pairs = cp.generate_corpus(spec, 5, np.random.default_rng(0))
    assert all(p == (("only",), ("lonely",)) for p in pairs)


def test_identity_cipher_identity_reorder_copies_source():
    words = ("a", "b", "c")
    spec = cp.LanguagePairSpec(
        src_lang="src",
        trg_lang="trg",
        templates=(("w", "w"), ("w", "w", "w")),
        categories={"w": words},
        cipher={w: w for w in words},
    )
    for src, trg in cp.generate_corpus(spec, 30, np.random.default_rng(3)):
        assert src == trg


def test_reorder_rule_permutes_target():
    spec = cp.LanguagePairSpec(
        src_lang="src",
        trg_lang="trg",
        templates=(("a", "b"),),
        categories={"a": ("x",), "b": ("y",)},
        cipher={"x": "X", "y": "Y"},
        reorder={0: (1, 0)},
    )
    src, trg = cp.generate_corpus(spec, 1, np.random.default_rng(0))[0]
    assert src == ("x", "y")
    assert trg == ("Y", "X")


def test_generate_rejects_bad_inputs():
    spec = tiny_pair_spec()
    with pytest.raises(cp.CorpusError):
        cp.generate_corpus(spec, 0, np.random.default_rng(0))
    with pytest.raises(cp.CorpusError):
        cp.LanguagePairSpec(
            src_lang="s", trg_lang="t", templates=(), categories={}, cipher={}
        )
    with pytest.raises(cp.CorpusError):  # unresolvable slot
        cp.LanguagePairSpec(
            src_lang="s",
            trg_lang="t",
            templates=(("ghost",),),
            categories={"noun": ("a",)},
            cipher={"a": "b"},
        )
    with pytest.raises(cp.CorpusError):  # non-injective cipher
        cp.LanguagePairSpec(
            src_lang="s",
            trg_lang="t",
            templates=(("noun",),),
            categories={"noun": ("a", "b")},
            cipher={"a": "x", "b": "x"},
        )


def test_cipher_bijectivity_roundtrip():
    spec = cp.default_pair_spec()
    inverse = spec.decipher()
    for w in spec.src_words():
        assert inverse[spec.cipher[w]] == w
    assert len(set(spec.cipher.values())) == len(spec.cipher)


def test_default_spec_shape_requirements():
    spec = cp.default_pair_spec()
    assert len(spec.templates) >= 20
    lengths = {len(t) for t in spec.templates}
    assert min(lengths) == 4 and max(lengths) == 12
    for cat in ("name", "noun", "verb", "adj", "adv"):
        assert len(spec.categories[cat]) >= 30, cat
    # globally unique words across categories
    words = [w for ws in spec.categories.values() for w in ws]
    assert len(words) == len(set(words))


def test_default_spec_vocabulary_coverage_in_5k_samples():
    spec = cp.default_pair_spec()
    pairs = cp.generate_corpus(spec, 5000, np.random.default_rng(11))
    seen_src = Counter(w for src, _ in pairs for w in src)
    seen_trg = Counter(w for _, trg in pairs for w in trg)
    missing_src = [w for w in spec.src_words() if seen_src[w] == 0]
    missing_trg = [w for w in spec.trg_words() if seen_trg[w] == 0]
    assert not missing_src, f"unseen source words: {missing_src[:5]}"
    assert not missing_trg, f"unseen target words: {missing_trg[:5]}"
    lengths = {len(src) for src, _ in pairs}
    assert min(lengths) >= 4 and max(lengths) <= 12


def test_vocabulary_bijection_and_specials():
    v = cp.Vocabulary.from_words("src", ["b", "a", "b"])
    assert len(v) == 6  # 4 specials + 2 unique words
    assert v.tokens[:4] == cp.SPECIAL_TOKENS
    assert v.encode(["a", "b", "zzz"]) == (4, 5, cp.UNK)
    assert v.decode([4, 5]) == ["a", "b"]
    assert v.sentence(["a"]).lang == "src"


def test_oracle_embeddings_exact_match_without_noise():
    spec = tiny_pair_spec()
    vs, vt = cp.build_vocabularies(spec)
    emb = cp.oracle_embeddings(vs, vt, spec.cipher, 16, np.random.default_rng(5))
    for w in spec.src_words():
        i = vs.id_of(w)
        j = vt.id_of(spec.cipher[w])
        assert np.array_equal(emb["src"][i], emb["trg"][j]), w
    # specials shared across languages
    for sid in range(4):
        assert np.array_equal(emb["src"][sid], emb["trg"][sid])
    norms = np.linalg.norm(emb["src"], axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-12


def test_oracle_embeddings_noise_keeps_high_cosine():
    spec = cp.default_pair_spec()
    vs, vt = cp.build_vocabularies(spec)
    emb = cp.oracle_embeddings(
        vs, vt, spec.cipher, 32, np.random.default_rng(6), noise_sigma=0.1
    )
    cos = []
    for w in spec.src_words():
        a = emb["src"][vs.id_of(w)]
        b = emb["trg"][vt.id_of(spec.cipher[w])]
        cos.append(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert np.mean(cos) > 0.9


def test_oracle_embeddings_reject_uncovered_words():
    spec = tiny_pair_spec()
    vs, vt = cp.build_vocabularies(spec)
    broken = dict(spec.cipher)
    del broken["n0"]
    with pytest.raises(cp.CorpusError):
        cp.oracle_embeddings(vs, vt, broken, 8, np.random.default_rng(0))
    with pytest.raises(cp.CorpusError):
        cp.oracle_embeddings(vs, vt, spec.cipher, 1, np.random.default_rng(0))


def test_tokenize_detokenize_roundtrip():
    line = "the quick brown fox"
    assert cp.detokenize(cp.tokenize(line)) == line


def test_corpus_file_roundtrip(tmp_path):
    spec = tiny_pair_spec()
    vs, vt = cp.build_vocabularies(spec)
    rng = np.random.default_rng(8)
    pairs = cp.encode_pairs(cp.generate_corpus(spec, 25, rng), vs, vt)
    sentences = [p[0] for p in pairs]
    path = tmp_path / "corpus.txt"
    cp.write_corpus(path, vs, sentences)
    text = path.read_text("utf-8")
    assert not any(line != line.rstrip() for line in text.splitlines())
    back = cp.read_corpus(path, vs)
    assert [s.ids for s in back] == [s.ids for s in sentences]


def test_vocab_file_roundtrip(tmp_path):
    spec = tiny_pair_spec()
    vs, _ = cp.build_vocabularies(spec)
    cp.save_vocab(vs, tmp_path / "v.txt")
    back = cp.load_vocab("src", tmp_path / "v.txt")
    assert back.tokens == vs.tokens


def test_pair_spec_file_roundtrip(tmp_path):
    spec = cp.default_pair_spec()
    spec.seed = 99
    spec.reorder = {0: tuple(reversed(range(len(spec.templates[0]))))}
    cp.save_pair_spec(spec, tmp_path / "spec.json")
    back = cp.load_pair_spec(tmp_path / "spec.json")
    assert back.templates == spec.templates
    assert back.categories == spec.categories
    assert back.cipher == spec.cipher
    assert back.reorder == spec.reorder
    assert back.seed == 99
