import numpy as np
import pytest

from unmtlab import corpus as cp
from unmtlab.model import Model, ModelConfig


def tiny_pair_spec(words_per_cat: int = 6) -> cp.LanguagePairSpec:
    """A very small but non-degenerate language pair for fast tests."""
    nouns = tuple(f"n{i}" for i in range(words_per_cat))
    verbs = tuple(f"v{i}" for i in range(words_per_cat))
    dets = ("da", "du")
    cipher = {}
    for w in nouns + verbs + dets:
        cipher[w] = "Z" + w
    return cp.LanguagePairSpec(
        src_lang="src",
        trg_lang="trg",
        templates=(
            ("det", "noun", "verb"),
            ("det", "noun", "verb", "det", "noun"),
            ("noun", "verb", "det", "noun"),
        ),
        categories={"noun": nouns, "verb": verbs, "det": dets},
        cipher=cipher,
    )


def build_tiny_model(seed: int = 7, dims: tuple[int, int, int] = (8, 8, 8), spec=None):
    spec = spec or tiny_pair_spec()
    vs, vt = cp.build_vocabularies(spec)
    rng = np.random.default_rng(seed)
    emb = cp.oracle_embeddings(vs, vt, spec.cipher, dims[0], rng)
    cfg = ModelConfig(emb_dim=dims[0], hidden=dims[1], att_dim=dims[2])
    model = Model.build(cfg, {"src": vs, "trg": vt}, ("src", "trg"), emb, rng)
    return spec, model


@pytest.fixture
def tiny_spec():
    return tiny_pair_spec()


@pytest.fixture
def tiny_model():
    return build_tiny_model()[1]
