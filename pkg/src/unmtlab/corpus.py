"""Synthetic cipher language pairs, corpora, vocabularies, oracle embeddings.

A language pair is defined by a template grammar (slot categories filled from
per-category word lists), a bijective word cipher mapping source words to
target words, and an optional per-template reordering of target slots
(identity by default: source and target share word order, which is exactly
the regime where shuffle-noise scrambling is measurable).

Oracle embeddings replace the usual monolingual-embedding + cross-lingual
mapping pipeline: each source word gets a random unit vector and its cipher
image gets the same vector (plus optional noise), so the cross-lingual signal
is perfect by construction.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PAD",
    "SOS",
    "EOS",
    "UNK",
    "SPECIAL_TOKENS",
    "CorpusError",
    "Sentence",
    "Vocabulary",
    "LanguagePairSpec",
    "Corpus",
    "ParallelCorpus",
    "CorpusSplits",
    "tokenize",
    "detokenize",
    "generate_corpus",
    "encode_pairs",
    "split_corpora",
    "oracle_embeddings",
    "build_vocabularies",
    "default_pair_spec",
    "save_pair_spec",
    "load_pair_spec",
    "save_vocab",
    "load_vocab",
    "write_corpus",
    "read_corpus",
    "read_token_lines",
]

PAD, SOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<sos>", "<eos>", "<unk>")


class CorpusError(ValueError):
    """Invalid language-pair spec, vocabulary or corpus operation."""


@dataclass(frozen=True, slots=True)
class Sentence:
    """Token ids in a language-tagged vocabulary (content tokens only)."""

    lang: str
    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class Vocabulary:
    """Dense token <-> id bijection with reserved ids 0-3 for specials."""

    lang: str
    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != SPECIAL_TOKENS:
            raise CorpusError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self._index = {t: i for i, t in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise CorpusError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_words(cls, lang: str, words) -> "Vocabulary":
        return cls(lang=lang, tokens=SPECIAL_TOKENS + tuple(sorted(set(words))))

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK)

    def encode(self, words) -> tuple[int, ...]:
        return tuple(self._index.get(w, UNK) for w in words)

    def sentence(self, words) -> Sentence:
        return Sentence(self.lang, self.encode(words))

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]


@dataclass
class LanguagePairSpec:
    """Template grammar + word cipher defining one synthetic language pair."""

    src_lang: str
    trg_lang: str
    templates: tuple[tuple[str, ...], ...]
    categories: dict[str, tuple[str, ...]]
    cipher: dict[str, str]
    reorder: dict[int, tuple[int, ...]] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if not self.templates:
            raise CorpusError("spec has no templates")
        for t, slots in enumerate(self.templates):
            for cat in slots:
                if cat not in self.categories or not self.categories[cat]:
                    raise CorpusError(f"template {t}: unresolvable slot {cat!r}")
        words = self.src_words()
        missing = [w for w in words if w not in self.cipher]
        if missing:
            raise CorpusError(f"cipher missing words: {missing[:5]}...")
        images = [self.cipher[w] for w in words]
        if len(set(images)) != len(images):
            raise CorpusError("cipher is not injective over the vocabulary")
        for t, perm in self.reorder.items():
            if not 0 <= t < len(self.templates):
                raise CorpusError(f"reorder rule for unknown template {t}")
            if sorted(perm) != list(range(len(self.templates[t]))):
                raise CorpusError(f"reorder rule for template {t} is not a permutation")

    def src_words(self) -> list[str]:
        seen: dict[str, None] = {}
        for cat_words in self.categories.values():
            for w in cat_words:
                seen[w] = None
        return list(seen)

    def trg_words(self) -> list[str]:
        return [self.cipher[w] for w in self.src_words()]

    def decipher(self) -> dict[str, str]:
        return {v: k for k, v in self.cipher.items()}


@dataclass
class Corpus:
    """Monolingual sentence list with provenance for hygiene checks."""

    lang: str
    sentences: list[Sentence]
    provenance: str  # train-mono-src | train-mono-trg | dev | test
    pair_ids: tuple[int, ...]


@dataclass
class ParallelCorpus:
    src: list[Sentence]
    trg: list[Sentence]
    provenance: str
    pair_ids: tuple[int, ...]


@dataclass
class CorpusSplits:
    mono_src: Corpus
    mono_trg: Corpus
    dev: ParallelCorpus
    test: ParallelCorpus


def tokenize(line: str) -> list[str]:
    return line.split()


def detokenize(tokens) -> str:
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# generation


def generate_corpus(
    spec: LanguagePairSpec, n: int, rng: np.random.Generator
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Sample n parallel (source, target) token-tuple pairs from the spec."""
    if n < 1:
        raise CorpusError("need n >= 1 pairs")
    n_templates = len(spec.templates)
    pairs = []
    for _ in range(n):
        t = int(rng.integers(0, n_templates))
        slots = spec.templates[t]
        src = tuple(
            spec.categories[cat][int(rng.integers(0, len(spec.categories[cat])))]
            for cat in slots
        )
        trg = tuple(spec.cipher[w] for w in src)
        perm = spec.reorder.get(t)
        if perm is not None:
            trg = tuple(trg[p] for p in perm)
        pairs.append((src, trg))
    return pairs


def build_vocabularies(spec: LanguagePairSpec) -> tuple[Vocabulary, Vocabulary]:
    return (
        Vocabulary.from_words(spec.src_lang, spec.src_words()),
        Vocabulary.from_words(spec.trg_lang, spec.trg_words()),
    )


def encode_pairs(
    pairs, vocab_src: Vocabulary, vocab_trg: Vocabulary
) -> list[tuple[Sentence, Sentence]]:
    return [(vocab_src.sentence(s), vocab_trg.sentence(t)) for s, t in pairs]


def _split_sizes(n: int, fractions) -> list[int]:
    # largest-remainder apportionment; exact for fractions like 0.4/0.1
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"fractions must sum to 1, got {fractions}")
    raw = [f * n for f in fractions]
    sizes = [int(x) for x in raw]
    rema = sorted(range(len(raw)), key=lambda i: raw[i] - sizes[i], reverse=True)
    short = n - sum(sizes)
    for i in rema[:short]:
        sizes[i] += 1
    if any(s < 1 for s in sizes):
        raise CorpusError(f"insufficient pairs ({n}) for fractions {fractions}")
    return sizes


def split_corpora(
    sentence_pairs: list[tuple[Sentence, Sentence]],
    fractions: tuple[float, float, float, float],
    rng: np.random.Generator,
) -> CorpusSplits:
    """Partition pairs into disjoint mono-src / mono-trg / dev / test splits.

    The two monolingual training splits come from disjoint pair sets and each
    exposes only one side, preserving the unsupervised setting.
    """
    if len(fractions) != 4:
        raise CorpusError("expected 4 fractions (mono-src, mono-trg, dev, test)")
    n = len(sentence_pairs)
    sizes = _split_sizes(n, fractions)
    order = rng.permutation(n)
    bounds = np.cumsum(sizes)
    idx_src = tuple(int(i) for i in order[: bounds[0]])
    idx_trg = tuple(int(i) for i in order[bounds[0] : bounds[1]])
    idx_dev = tuple(int(i) for i in order[bounds[1] : bounds[2]])
    idx_test = tuple(int(i) for i in order[bounds[2] : bounds[3]])
    src_lang = sentence_pairs[0][0].lang
    trg_lang = sentence_pairs[0][1].lang
    return CorpusSplits(
        mono_src=Corpus(
            src_lang,
            [sentence_pairs[i][0] for i in idx_src],
            "train-mono-src",
            idx_src,
        ),
        mono_trg=Corpus(
            trg_lang,
            [sentence_pairs[i][1] for i in idx_trg],
            "train-mono-trg",
            idx_trg,
        ),
        dev=ParallelCorpus(
            [sentence_pairs[i][0] for i in idx_dev],
            [sentence_pairs[i][1] for i in idx_dev],
            "dev",
            idx_dev,
        ),
        test=ParallelCorpus(
            [sentence_pairs[i][0] for i in idx_test],
            [sentence_pairs[i][1] for i in idx_test],
            "test",
            idx_test,
        ),
    )


def oracle_embeddings(
    vocab_src: Vocabulary,
    vocab_trg: Vocabulary,
    cipher: dict[str, str],
    dim: int,
    rng: np.random.Generator,
    noise_sigma: float = 0.0,
) -> dict[str, np.ndarray]:
    """Shared-space embedding tables keyed by language tag.

    Source words get random unit-norm vectors; each target word receives the
    vector of its cipher preimage plus optional zero-mean Gaussian noise whose
    expected norm is noise_sigma (per-coordinate std sigma/sqrt(dim), so the
    corruption level is dimension-independent). Special tokens share one set
    of vectors across both tables.
    """
    if dim < 2:
        raise CorpusError("embedding dim must be >= 2")

    def unit(v):
        return v / np.linalg.norm(v)

    special = [unit(rng.standard_normal(dim)) for _ in SPECIAL_TOKENS]
    emb_src = np.zeros((len(vocab_src), dim))
    emb_trg = np.zeros((len(vocab_trg), dim))
    for i, vec in enumerate(special):
        emb_src[i] = vec
        emb_trg[i] = vec
    trg_index = {t: i for i, t in enumerate(vocab_trg.tokens)}
    for i, word in enumerate(vocab_src.tokens):
        if i < len(SPECIAL_TOKENS):
            continue
        if word not in cipher:
            raise CorpusError(f"source word {word!r} outside cipher map")
        image = cipher[word]
        if image not in trg_index:
            raise CorpusError(f"cipher image {image!r} outside target vocabulary")
        vec = unit(rng.standard_normal(dim))
        emb_src[i] = vec
        emb_trg[trg_index[image]] = vec
    if noise_sigma > 0:
        scale = noise_sigma / np.sqrt(dim)
        noise = scale * rng.standard_normal((len(vocab_trg), dim))
        emb_trg[len(SPECIAL_TOKENS) :] += noise[len(SPECIAL_TOKENS) :]
    return {vocab_src.lang: emb_src, vocab_trg.lang: emb_trg}


# ---------------------------------------------------------------------------
# shipped default language pair

_SRC_ONSETS = "b d k l m n p r s t".split()
_TRG_ONSETS = "ch f g h j v w y z q".split()
_VOWELS = "a e i o u".split()


def _syllables(onsets):
    return [o + v for o in onsets for v in _VOWELS]


def _two_syllable_words(syllables, count, offset=0):
    combos = itertools.islice(
        itertools.product(syllables, syllables), offset, offset + count
    )
    return tuple(a + b for a, b in combos)


_TEMPLATES = (
    # lengths 4-12; repeated categories force order to matter
    ("name", "verb", "det", "noun"),
    ("det", "noun", "verb", "adv"),
    ("name", "verb", "adj", "noun"),
    ("det", "noun", "verb", "det", "noun"),
    ("name", "verb", "det", "adj", "noun"),
    ("det", "adj", "noun", "verb", "adv"),
    ("det", "noun", "verb", "det", "adj", "noun"),
    ("det", "adj", "noun", "verb", "det", "noun"),
    ("name", "verb", "det", "noun", "prep", "name"),
    ("det", "noun", "prep", "det", "noun", "verb"),
    ("det", "adj", "noun", "verb", "det", "adj", "noun"),
    ("name", "verb", "det", "noun", "prep", "det", "noun"),
    ("det", "noun", "verb", "adv", "prep", "det", "noun"),
    ("det", "noun", "prep", "det", "noun", "verb", "det", "noun"),
    ("det", "adj", "noun", "verb", "det", "noun", "prep", "name"),
    ("name", "conj", "name", "verb", "det", "adj", "noun", "adv"),
    ("det", "adj", "noun", "prep", "det", "noun", "verb", "det", "noun"),
    ("det", "noun", "verb", "det", "adj", "noun", "prep", "det", "noun"),
    ("det", "adj", "noun", "verb", "det", "noun", "conj", "name", "verb", "adv"),
    ("det", "noun", "prep", "det", "adj", "noun", "verb", "det", "adj", "noun"),
    ("name", "verb", "det", "adj", "noun", "conj", "det", "noun", "verb", "det", "noun"),
    ("det", "adj", "noun", "verb", "adv", "conj", "det", "noun", "verb", "det", "noun"),
    ("det", "adj", "noun", "verb", "det", "noun", "prep", "det", "noun", "conj", "name", "verb"),
    ("det", "noun", "verb", "det", "adj", "noun", "conj", "det", "noun", "verb", "det", "noun"),
)

_CONTENT_SIZES = {"name": 30, "noun": 40, "verb": 36, "adj": 34, "adv": 30}


def default_pair_spec(src_lang: str = "src", trg_lang: str = "trg") -> LanguagePairSpec:
    """The shipped toy language pair: 24 templates, 170 content words/side."""
    src_syl = _syllables(_SRC_ONSETS)
    trg_syl = _syllables(_TRG_ONSETS)
    closed_src = {
        "det": ("na", "de", "ku", "po"),
        "prep": ("su", "mi", "lo", "ri", "ta"),
        "conj": ("to", "ne", "ba"),
    }
    closed_trg = {
        "det": ("cha", "fe", "gi", "ho"),
        "prep": ("ju", "va", "we", "yo", "zu"),
        "conj": ("ga", "he", "wi"),
    }
    categories: dict[str, tuple[str, ...]] = dict(closed_src)
    cipher: dict[str, str] = {}
    for cat in closed_src:
        cipher.update(zip(closed_src[cat], closed_trg[cat]))
    offset = 0
    for cat, count in _CONTENT_SIZES.items():
        src_words = _two_syllable_words(src_syl, count, offset)
        trg_words = _two_syllable_words(trg_syl, count, offset)
        categories[cat] = src_words
        cipher.update(zip(src_words, trg_words))
        offset += count
    return LanguagePairSpec(
        src_lang=src_lang,
        trg_lang=trg_lang,
        templates=_TEMPLATES,
        categories=categories,
        cipher=cipher,
        seed=None,
    )


# ---------------------------------------------------------------------------
# file formats (UTF-8, one sentence per line, single-space separated)


def save_pair_spec(spec: LanguagePairSpec, path) -> None:
    doc = {
        "src_lang": spec.src_lang,
        "trg_lang": spec.trg_lang,
        "templates": [list(t) for t in spec.templates],
        "categories": {k: list(v) for k, v in spec.categories.items()},
        "cipher": spec.cipher,
        "reorder": {str(k): list(v) for k, v in spec.reorder.items()},
        "seed": spec.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", "utf-8")


def load_pair_spec(path) -> LanguagePairSpec:
    doc = json.loads(Path(path).read_text("utf-8"))
    return LanguagePairSpec(
        src_lang=doc["src_lang"],
        trg_lang=doc["trg_lang"],
        templates=tuple(tuple(t) for t in doc["templates"]),
        categories={k: tuple(v) for k, v in doc["categories"].items()},
        cipher=dict(doc["cipher"]),
        reorder={int(k): tuple(v) for k, v in doc.get("reorder", {}).items()},
        seed=doc.get("seed"),
    )


def save_vocab(vocab: Vocabulary, path) -> None:
    Path(path).write_text("\n".join(vocab.tokens) + "\n", "utf-8")


def load_vocab(lang: str, path) -> Vocabulary:
    tokens = Path(path).read_text("utf-8").splitlines()
    return Vocabulary(lang=lang, tokens=tuple(tokens))


def write_corpus(path, vocab: Vocabulary, sentences) -> None:
    lines = [detokenize(vocab.decode(s.ids)) for s in sentences]
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_corpus(path, vocab: Vocabulary) -> list[Sentence]:
    lines = Path(path).read_text("utf-8").splitlines()
    return [vocab.sentence(tokenize(line)) for line in lines]


def read_token_lines(path) -> list[list[str]]:
    return [tokenize(line) for line in Path(path).read_text("utf-8").splitlines()]
