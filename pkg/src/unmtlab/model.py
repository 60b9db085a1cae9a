"""The UNMT network: cross-lingual embeddings, one shared bidirectional GRU
encoder, and one attentional GRU decoder per language.

All forward math is written against an executor (diffcore.Tape for training,
diffcore.Raw for inference), so the differentiable loss and greedy decoding
share kernels bit-for-bit. Matrices only: hidden states are 1 x H rows,
encoder outputs are stacked into an S x 2h matrix with constant one-hot
selectors, and additive-attention scores are transposed into a row the same
way (the primitive set has no transpose).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diffcore
from .corpus import EOS, SOS, Sentence, Vocabulary
from .diffcore import RAW, Tape

__all__ = [
    "ModelError",
    "ModelConfig",
    "Model",
    "LossResult",
    "Translation",
    "encode",
    "decoder_loss",
    "translate",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "params_equal",
]

_GRU_SUFFIXES = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wc", "Uc", "bc")
_DEC_EXTRA = ("att.W", "att.U", "att.b", "att.v", "init.W", "init.b", "out.W", "out.b")
CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    """Invalid model input (unknown language, bad sentence, bad shapes)."""


@dataclass(frozen=True)
class ModelConfig:
    emb_dim: int = 32
    hidden: int = 64  # per direction; decoders run at 2 * hidden
    att_dim: int = 64
    freeze_embeddings: bool = True

    def __post_init__(self):
        if min(self.emb_dim, self.hidden, self.att_dim) < 1:
            raise ModelError("model dimensions must be positive")


@dataclass
class LossResult:
    """Scalar loss with its tape; param_nodes maps name -> leaf node id."""

    tape: Tape
    node: int
    value: float
    param_nodes: dict[str, int]


@dataclass
class Translation:
    sentence: Sentence
    attention: np.ndarray  # one row per emitted content token
    reached_max: bool


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def _init_gru(rng, din: int, dh: int, prefix: str, params: dict) -> None:
    for gate in ("z", "r", "c"):
        params[f"{prefix}.W{gate}"] = _glorot(rng, din, dh)
        params[f"{prefix}.U{gate}"] = _glorot(rng, dh, dh)
        params[f"{prefix}.b{gate}"] = np.zeros((1, dh))


class Model:
    """Parameter container plus the vocabularies it was built against."""

    def __init__(
        self,
        cfg: ModelConfig,
        langs: tuple[str, str],
        vocabs: dict[str, Vocabulary],
        params: dict[str, np.ndarray],
    ):
        self.cfg = cfg
        self.langs = tuple(langs)
        self.vocabs = vocabs
        self.params = params

    @classmethod
    def build(
        cls,
        cfg: ModelConfig,
        vocabs: dict[str, Vocabulary],
        langs: tuple[str, str],
        embeddings: dict[str, np.ndarray],
        rng: np.random.Generator,
    ) -> "Model":
        if len(langs) != 2 or any(l not in vocabs for l in langs):
            raise ModelError(f"need vocabularies for both languages, got {langs}")
        h, d, a = cfg.hidden, cfg.emb_dim, cfg.att_dim
        params: dict[str, np.ndarray] = {}
        for lang in langs:
            emb = np.asarray(embeddings[lang], dtype=np.float64).copy()
            if emb.shape != (len(vocabs[lang]), d):
                raise ModelError(
                    f"embedding table for {lang!r} is {emb.shape}, expected "
                    f"({len(vocabs[lang])}, {d})"
                )
            params[f"emb.{lang}"] = emb
        _init_gru(rng, d, h, "enc.fw", params)
        _init_gru(rng, d, h, "enc.bw", params)
        for lang in langs:
            pre = f"dec.{lang}"
            _init_gru(rng, d + 2 * h, 2 * h, pre, params)
            params[f"{pre}.att.W"] = _glorot(rng, 2 * h, a)
            params[f"{pre}.att.U"] = _glorot(rng, 2 * h, a)
            params[f"{pre}.att.b"] = np.zeros((1, a))
            params[f"{pre}.att.v"] = _glorot(rng, a, 1)
            params[f"{pre}.init.W"] = _glorot(rng, 2 * h, 2 * h)
            params[f"{pre}.init.b"] = np.zeros((1, 2 * h))
            params[f"{pre}.out.W"] = _glorot(rng, 4 * h, len(vocabs[lang]))
            params[f"{pre}.out.b"] = np.zeros((1, len(vocabs[lang])))
        return cls(cfg, langs, vocabs, params)

    def copy(self) -> "Model":
        return Model(
            self.cfg, self.langs, self.vocabs, {k: v.copy() for k, v in self.params.items()}
        )

    def other_lang(self, lang: str) -> str:
        a, b = self.langs
        return b if lang == a else a


def trainable_names(model: Model, in_lang: str, out_lang: str) -> list[str]:
    """Parameters a loss through decoder `out_lang` on `in_lang` input trains.

    Order matches the registration order of the loss graph.
    """
    names: list[str] = []
    if not model.cfg.freeze_embeddings:
        names.append(f"emb.{in_lang}")
        if out_lang != in_lang:
            names.append(f"emb.{out_lang}")
    names += [f"enc.fw.{s}" for s in _GRU_SUFFIXES]
    names += [f"enc.bw.{s}" for s in _GRU_SUFFIXES]
    names += [f"dec.{out_lang}.{s}" for s in _GRU_SUFFIXES]
    names += [f"dec.{out_lang}.{s}" for s in _DEC_EXTRA]
    return names


def _validate_sentence(model: Model, sent: Sentence) -> None:
    if sent.lang not in model.vocabs:
        raise ModelError(f"unknown language tag {sent.lang!r}")
    if len(sent) == 0:
        raise ModelError("empty sentence")
    v = len(model.vocabs[sent.lang])
    for i in sent.ids:
        if not 0 <= i < v:
            raise ModelError(f"token id {i} outside vocabulary of {sent.lang!r} ({v})")


def _resolve(ex, model: Model, in_lang: str, out_lang: str, S: int, T: int | None, preset=None):
    """Register all handles a loss/decode graph needs; leaves come first.

    preset maps parameter names to already-registered handles (used by the
    gradient check to take ownership of the probe leaves).
    """
    p = model.params
    cfg = model.cfg
    pnodes: dict[str, int] = {}
    preset = preset or {}

    def reg(name, requires):
        if name in preset:
            h = preset[name]
        else:
            # params stay finite by induction (clipped SGD of finite grads)
            h = ex.leaf(p[name], requires_grad=requires, check=False)
        if requires:
            pnodes[name] = h
        return h

    emb_req = not cfg.freeze_embeddings
    hb: dict = {}
    hb["emb_in"] = reg(f"emb.{in_lang}", emb_req)
    hb["emb_out"] = hb["emb_in"] if in_lang == out_lang else reg(f"emb.{out_lang}", emb_req)
    hb["enc_fw"] = tuple(reg(f"enc.fw.{s}", True) for s in _GRU_SUFFIXES)
    hb["enc_bw"] = tuple(reg(f"enc.bw.{s}", True) for s in _GRU_SUFFIXES)
    hb["dec_gru"] = tuple(reg(f"dec.{out_lang}.{s}", True) for s in _GRU_SUFFIXES)
    for s in _DEC_EXTRA:
        hb[s] = reg(f"dec.{out_lang}.{s}", True)
    h = cfg.hidden
    hb["zero_h"] = ex.leaf(np.zeros((1, h)), check=False)
    hb["neg_h"] = ex.leaf(np.full((1, h), -1.0), check=False)
    hb["neg_2h"] = ex.leaf(np.full((1, 2 * h), -1.0), check=False)
    eye = np.eye(S)
    hb["colsels"] = [ex.leaf(eye[:, s : s + 1], check=False) for s in range(S)]
    hb["rowsels"] = [ex.leaf(eye[s : s + 1, :], check=False) for s in range(S)]
    if T is not None:
        hb["invT"] = ex.leaf(np.array([[1.0 / T]]), check=False)
    return hb, pnodes


def _gru_step(ex, g, x, h, neg):
    Wz, Uz, bz, Wr, Ur, br, Wc, Uc, bc = g
    z = ex.sigmoid(ex.radd(ex.add(ex.matmul(x, Wz), ex.matmul(h, Uz)), bz))
    r = ex.sigmoid(ex.radd(ex.add(ex.matmul(x, Wr), ex.matmul(h, Ur)), br))
    c = ex.tanh(ex.radd(ex.add(ex.matmul(x, Wc), ex.matmul(ex.mul(r, h), Uc)), bc))
    # h' = h + z * (c - h); the subtraction runs through a -1 constant
    return ex.add(h, ex.mul(z, ex.add(c, ex.mul(neg, h))))


def _encode_graph(ex, hb, ids):
    xs = [ex.lookup(hb["emb_in"], (int(i),)) for i in ids]
    S = len(xs)
    gf, gb, zero, neg = hb["enc_fw"], hb["enc_bw"], hb["zero_h"], hb["neg_h"]
    fwd = []
    h = zero
    for x in xs:
        h = _gru_step(ex, gf, x, h, neg)
        fwd.append(h)
    bwd = [None] * S
    h = zero
    for s in range(S - 1, -1, -1):
        h = _gru_step(ex, gb, xs[s], h, neg)
        bwd[s] = h
    states = [ex.hconcat((fwd[s], bwd[s])) for s in range(S)]
    stack = None
    for s in range(S):
        outer = ex.matmul(hb["colsels"][s], states[s])
        stack = outer if stack is None else ex.add(stack, outer)
    return stack, (fwd[-1], bwd[0])


def _init_state(ex, hb, ends):
    summary = ex.hconcat(ends)
    return ex.tanh(ex.radd(ex.matmul(summary, hb["init.W"]), hb["init.b"]))


def _attend(ex, hb, P, stack, s_prev):
    q = ex.matmul(s_prev, hb["att.U"])
    u = ex.tanh(ex.radd(P, q))
    ecol = ex.matmul(u, hb["att.v"])  # S x 1
    erow = ex.hconcat([ex.matmul(r, ecol) for r in hb["rowsels"]])  # 1 x S
    alpha = ex.softmax(erow)
    return alpha, ex.matmul(alpha, stack)


def _loss_build(ex, model: Model, src: Sentence, tgt: Sentence, decoder_lang: str, preset=None):
    hb, pnodes = _resolve(ex, model, src.lang, decoder_lang, len(src), len(tgt), preset)
    stack, ends = _encode_graph(ex, hb, src.ids)
    P = ex.radd(ex.matmul(stack, hb["att.W"]), hb["att.b"])
    s = _init_state(ex, hb, ends)
    gru, neg = hb["dec_gru"], hb["neg_2h"]
    total = None
    prev = SOS
    for y in tgt.ids:
        alpha, ctx = _attend(ex, hb, P, stack, s)
        x = ex.hconcat((ex.lookup(hb["emb_out"], (prev,)), ctx))
        s = _gru_step(ex, gru, x, s, neg)
        logits = ex.radd(ex.matmul(ex.hconcat((s, ctx)), hb["out.W"]), hb["out.b"])
        step = ex.ce(logits, int(y), 1.0)
        total = step if total is None else ex.add(total, step)
        prev = int(y)
    return ex.mul(total, hb["invT"]), pnodes


def encode(sentence: Sentence, model: Model) -> np.ndarray:
    """Shared-encoder states, one S x 2h matrix row per source token."""
    _validate_sentence(model, sentence)
    hb, _ = _resolve(RAW, model, sentence.lang, sentence.lang, len(sentence), None)
    stack, _ends = _encode_graph(RAW, hb, sentence.ids)
    return stack


def decoder_loss(src: Sentence, tgt: Sentence, decoder_lang: str, model: Model) -> LossResult:
    """Mean per-token cross-entropy of tgt given encode(src), teacher forced.

    tgt must end with EOS. Returns the loss with its tape so the caller can
    run backward() and step the returned parameter leaves.
    """
    if decoder_lang not in model.langs:
        raise ModelError(f"language tag {decoder_lang!r} has no decoder")
    _validate_sentence(model, src)
    _validate_sentence(model, tgt)
    if tgt.lang != decoder_lang:
        raise ModelError(
            f"target is {tgt.lang!r} but decoder {decoder_lang!r} was requested"
        )
    if tgt.ids[-1] != EOS:
        raise ModelError("target must end with the end-of-sentence token")
    tape = Tape()
    node, pnodes = _loss_build(tape, model, src, tgt, decoder_lang)
    return LossResult(
        tape=tape, node=node, value=float(tape.value(node)[0, 0]), param_nodes=pnodes
    )


def translate(
    src: Sentence, direction: tuple[str, str], model: Model, max_len: int
) -> Translation:
    """Greedy decode until EOS or max_len; pure in (params, src, direction).

    Returns the emitted content tokens (EOS stripped) and one attention row
    per emitted token; reached_max flags length-capped outputs.
    """
    from_lang, to_lang = direction
    if from_lang not in model.langs or to_lang not in model.langs:
        raise ModelError(f"unknown direction {from_lang}:{to_lang}")
    if src.lang != from_lang:
        raise ModelError(f"sentence is {src.lang!r} but direction reads {from_lang!r}")
    if max_len < 1:
        raise ModelError("max_len must be >= 1")
    _validate_sentence(model, src)

    hb, _ = _resolve(RAW, model, from_lang, to_lang, len(src), None)
    stack, ends = _encode_graph(RAW, hb, src.ids)
    P = RAW.radd(RAW.matmul(stack, hb["att.W"]), hb["att.b"])
    s = _init_state(RAW, hb, ends)
    gru, neg = hb["dec_gru"], hb["neg_2h"]
    out_ids: list[int] = []
    rows: list[np.ndarray] = []
    prev = SOS
    reached_max = True
    for _ in range(max_len):
        alpha, ctx = _attend(RAW, hb, P, stack, s)
        x = RAW.hconcat((RAW.lookup(hb["emb_out"], (prev,)), ctx))
        s = _gru_step(RAW, gru, x, s, neg)
        logits = RAW.radd(RAW.matmul(RAW.hconcat((s, ctx)), hb["out.W"]), hb["out.b"])
        nxt = int(np.argmax(logits[0]))
        if nxt == EOS:
            reached_max = False
            break
        out_ids.append(nxt)
        rows.append(alpha[0])
        prev = nxt
    attn = np.vstack(rows) if rows else np.zeros((0, len(src)))
    return Translation(
        sentence=Sentence(to_lang, tuple(out_ids)), attention=attn, reached_max=reached_max
    )


def gradient_check(
    src: Sentence, tgt: Sentence, decoder_lang: str, model: Model, eps: float = 1e-5
) -> float:
    """Finite-difference check of decoder_loss over all trainable parameters."""
    names = trainable_names(model, src.lang, decoder_lang)
    arrays = [model.params[n] for n in names]

    def build(ex, handles):
        node, _ = _loss_build(
            ex, model, src, tgt, decoder_lang, preset=dict(zip(names, handles))
        )
        return node

    return diffcore.finite_diff_check(build, arrays, eps)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: Model, train_config: dict | None = None, rng_states: dict | None = None) -> None:
    """Versioned single-file container; load(save(m)) is bit-identical."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "langs": list(model.langs),
        "config": asdict(model.cfg),
        "vocab": {lang: list(v.tokens) for lang, v in model.vocabs.items()},
        "train_config": train_config,
        "rng": rng_states,
    }
    arrays = {f"param:{k}": v for k, v in model.params.items()}
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.asarray(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[Model, dict]:
    """Rebuild the model plus its metadata dict from a checkpoint file."""
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"][()]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ModelError(f"unsupported checkpoint version {meta.get('version')}")
        params = {
            k[len("param:") :]: np.array(data[k]) for k in data.files if k.startswith("param:")
        }
    vocabs = {
        lang: Vocabulary(lang=lang, tokens=tuple(tokens))
        for lang, tokens in meta["vocab"].items()
    }
    model = Model(
        cfg=ModelConfig(**meta["config"]),
        langs=tuple(meta["langs"]),
        vocabs=vocabs,
        params=params,
    )
    return model, meta


def params_equal(a: Model, b: Model) -> bool:
    """Bitwise equality of two models' parameter sets."""
    if a.params.keys() != b.params.keys():
        return False
    return all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
