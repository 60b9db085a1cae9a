"""Command-line entry point tying generation, training, translation,
evaluation and diagnostics into reproducible experiments.

Commands: gen-data, train, translate, evaluate, significance, diagnose,
heatmap. Every command takes an explicit seed (directly or via the config
file); no wall-clock seeding anywhere. Flags win over config file values.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as cp
from . import evaluation as ev
from .model import ModelConfig, load_checkpoint, translate
from .seeding import BOOTSTRAP, DATA, EMBEDDINGS, rng_for
from .training import TrainConfig, train, write_curve_csv

DEFAULT_FRACTIONS = (0.4, 0.4, 0.024, 0.176)
DEFAULT_PAIRS = 12500


@dataclass
class EvalSettings:
    bootstrap_samples: int = 1000
    alpha: float = 0.05
    tau1: float = 0.6
    tau2: float = 0.3


@dataclass
class ExperimentConfig:
    """Parsed config file; paths already resolved against the file's directory."""

    seed: int
    data_dir: Path
    model: ModelConfig = field(default_factory=ModelConfig)
    train: dict = field(default_factory=dict)
    eval: EvalSettings = field(default_factory=EvalSettings)
    emb_noise_sigma: float = 0.0


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    doc = json.loads(path.read_text("utf-8"))
    if "seed" not in doc:
        raise ValueError(f"{path}: config must set an explicit seed")
    data_dir = Path(doc.get("data_dir", "data"))
    if not data_dir.is_absolute():
        data_dir = path.parent / data_dir
    return ExperimentConfig(
        seed=int(doc["seed"]),
        data_dir=data_dir,
        model=ModelConfig(**doc.get("model", {})),
        train=dict(doc.get("train", {})),
        eval=EvalSettings(**doc.get("eval", {})),
        emb_noise_sigma=float(doc.get("emb_noise_sigma", 0.0)),
    )


def _read_lines(path) -> list[list[str]]:
    return cp.read_token_lines(path)


def _write_lines(path, token_lines) -> None:
    Path(path).write_text(
        "\n".join(cp.detokenize(toks) for toks in token_lines) + "\n", "utf-8"
    )


def _data_paths(data_dir: Path, spec: cp.LanguagePairSpec) -> dict[str, Path]:
    s, t = spec.src_lang, spec.trg_lang
    return {
        "spec": data_dir / "pair_spec.json",
        "vocab_src": data_dir / f"vocab.{s}.txt",
        "vocab_trg": data_dir / f"vocab.{t}.txt",
        "mono_src": data_dir / f"mono.{s}.txt",
        "mono_trg": data_dir / f"mono.{t}.txt",
        "dev_src": data_dir / f"dev.{s}.txt",
        "dev_trg": data_dir / f"dev.{t}.txt",
        "test_src": data_dir / f"test.{s}.txt",
        "test_trg": data_dir / f"test.{t}.txt",
    }


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> None:
    spec = cp.load_pair_spec(args.spec) if args.spec else cp.default_pair_spec()
    seed = args.seed if args.seed is not None else spec.seed
    if seed is None:
        raise ValueError("gen-data needs --seed (or a seed in the spec file)")
    fractions = tuple(float(x) for x in args.fractions.split(","))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = rng_for(seed, DATA)
    pairs = cp.generate_corpus(spec, args.pairs, rng)
    vocab_src, vocab_trg = cp.build_vocabularies(spec)
    splits = cp.split_corpora(cp.encode_pairs(pairs, vocab_src, vocab_trg), fractions, rng)

    spec_echo = cp.LanguagePairSpec(
        src_lang=spec.src_lang,
        trg_lang=spec.trg_lang,
        templates=spec.templates,
        categories=spec.categories,
        cipher=spec.cipher,
        reorder=spec.reorder,
        seed=int(seed),
    )
    paths = _data_paths(out, spec)
    cp.save_pair_spec(spec_echo, paths["spec"])
    cp.save_vocab(vocab_src, paths["vocab_src"])
    cp.save_vocab(vocab_trg, paths["vocab_trg"])
    cp.write_corpus(paths["mono_src"], vocab_src, splits.mono_src.sentences)
    cp.write_corpus(paths["mono_trg"], vocab_trg, splits.mono_trg.sentences)
    cp.write_corpus(paths["dev_src"], vocab_src, splits.dev.src)
    cp.write_corpus(paths["dev_trg"], vocab_trg, splits.dev.trg)
    cp.write_corpus(paths["test_src"], vocab_src, splits.test.src)
    cp.write_corpus(paths["test_trg"], vocab_trg, splits.test.trg)
    print(
        f"wrote {len(splits.mono_src.sentences)}/{len(splits.mono_trg.sentences)} mono, "
        f"{len(splits.dev.src)} dev, {len(splits.test.src)} test pairs to {out}"
    )


def _load_data(cfg: ExperimentConfig):
    spec = cp.load_pair_spec(cfg.data_dir / "pair_spec.json")
    paths = _data_paths(cfg.data_dir, spec)
    vocab_src = cp.load_vocab(spec.src_lang, paths["vocab_src"])
    vocab_trg = cp.load_vocab(spec.trg_lang, paths["vocab_trg"])
    splits = cp.CorpusSplits(
        mono_src=cp.Corpus(
            spec.src_lang, cp.read_corpus(paths["mono_src"], vocab_src), "train-mono-src", ()
        ),
        mono_trg=cp.Corpus(
            spec.trg_lang, cp.read_corpus(paths["mono_trg"], vocab_trg), "train-mono-trg", ()
        ),
        dev=cp.ParallelCorpus(
            cp.read_corpus(paths["dev_src"], vocab_src),
            cp.read_corpus(paths["dev_trg"], vocab_trg),
            "dev",
            (),
        ),
        test=cp.ParallelCorpus(
            cp.read_corpus(paths["test_src"], vocab_src),
            cp.read_corpus(paths["test_trg"], vocab_trg),
            "test",
            (),
        ),
    )
    return spec, {spec.src_lang: vocab_src, spec.trg_lang: vocab_trg}, splits


def cmd_train(args) -> None:
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    spec, vocabs, splits = _load_data(cfg)

    train_kwargs = dict(cfg.train)
    if args.mode:
        train_kwargs["mode"] = args.mode
    if args.switch is not None:
        train_kwargs["switch"] = args.switch
    tc = TrainConfig(seed=cfg.seed, model=cfg.model, **train_kwargs)

    emb = cp.oracle_embeddings(
        vocabs[spec.src_lang],
        vocabs[spec.trg_lang],
        spec.cipher,
        cfg.model.emb_dim,
        rng_for(cfg.seed, EMBEDDINGS),
        noise_sigma=cfg.emb_noise_sigma,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(tc, splits, vocabs, emb, out_dir=out)
    write_curve_csv(out / "curve.csv", result.curve)
    last = {p.direction: p.bleu for p in result.curve}
    print(
        f"trained {tc.mode} for {tc.iterations} iterations (M={tc.switch}); "
        f"final dev BLEU: "
        + ", ".join(f"{d} {b:.2f}" for d, b in sorted(last.items()))
    )
    print(f"artifacts: {out / 'curve.csv'}, " + ", ".join(result.checkpoint_paths.values()))


def _parse_direction(text: str) -> tuple[str, str]:
    parts = text.split(":")
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"direction must be '<from_lang>:<to_lang>', got {text!r}")
    return parts[0], parts[1]


def cmd_translate(args) -> None:
    model, meta = load_checkpoint(args.ckpt)
    direction = _parse_direction(args.direction)
    max_len = args.max_len or (meta.get("train_config") or {}).get("max_len", 20)
    vocab_in = model.vocabs[direction[0]]
    vocab_out = model.vocabs[direction[1]]
    attn_dir = Path(args.attn_dir) if args.attn_dir else None
    if attn_dir is not None:
        attn_dir.mkdir(parents=True, exist_ok=True)
    out_lines = []
    for i, tokens in enumerate(_read_lines(args.input)):
        tr = translate(vocab_in.sentence(tokens), direction, model, max_len)
        out_tokens = vocab_out.decode(tr.sentence.ids)
        out_lines.append(out_tokens)
        if attn_dir is not None:
            ev.export_heatmap(
                tr.attention, tokens, out_tokens, attn_dir / f"attn_{i:06d}.csv"
            )
    _write_lines(args.out, out_lines)
    print(f"translated {len(out_lines)} sentences -> {args.out}")


def cmd_evaluate(args) -> None:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    report = ev.corpus_bleu(hyps, refs)
    summary = ev.scramble_fraction(hyps, refs, args.tau1, args.tau2)
    text = ev.format_report(report, summary.fraction)
    Path(args.out).write_text(text, "utf-8")
    print(text, end="")


def cmd_significance(args) -> None:
    hyps_a = _read_lines(args.hyp_a)
    hyps_b = _read_lines(args.hyp_b)
    refs = _read_lines(args.ref)
    result = ev.paired_bootstrap(
        hyps_a,
        hyps_b,
        refs,
        samples=args.samples,
        seed=rng_for(args.seed, BOOTSTRAP).integers(0, 2**63 - 1),
        alpha=args.alpha,
        exhaustive=args.exhaustive,
    )
    text = (
        f"samples = {result.samples}\n"
        f"wins_b = {result.wins_b}\n"
        f"p_value = {result.p_value:.6f}\n"
        f"significant = {'true' if result.significant else 'false'}\n"
        f"alpha = {result.alpha}\n"
        f"bleu_a = {result.bleu_a:.2f}\n"
        f"bleu_b = {result.bleu_b:.2f}\n"
    )
    Path(args.out).write_text(text, "utf-8")
    print(text, end="")


def cmd_diagnose(args) -> None:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    summary = ev.scramble_fraction(hyps, refs, args.tau1, args.tau2)
    lines = [
        f"{i}\t{'flagged' if d.flagged else ('degenerate' if d.degenerate else 'ok')}"
        f"\t{d.p1:.4f}\t{d.p2:.4f}"
        for i, d in enumerate(summary.sentences)
    ]
    lines.append(f"scrambled_fraction = {summary.fraction:.4f}")
    Path(args.out).write_text("\n".join(lines) + "\n", "utf-8")
    print(lines[-1])


def cmd_heatmap(args) -> None:
    model, meta = load_checkpoint(args.ckpt)
    direction = _parse_direction(args.direction)
    max_len = args.max_len or (meta.get("train_config") or {}).get("max_len", 20)
    tokens = cp.tokenize(args.sentence)
    if not tokens:
        raise ValueError("empty sentence")
    tr = translate(model.vocabs[direction[0]].sentence(tokens), direction, model, max_len)
    out_tokens = model.vocabs[direction[1]].decode(tr.sentence.ids)
    export = ev.export_heatmap(tr.attention, tokens, out_tokens, args.out)
    print(f"translation: {cp.detokenize(out_tokens)}")
    print(f"mean_row_entropy = {export.mean_row_entropy:.4f}")
    print(f"wrote {export.path}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="unmtlab",
        description="desk-scale denoising-UNMT laboratory",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic cipher language pair")
    g.add_argument("--spec", help="pair spec JSON (default: built-in toy pair)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="generation seed")
    g.add_argument("--pairs", type=int, default=DEFAULT_PAIRS)
    g.add_argument(
        "--fractions",
        default=",".join(str(f) for f in DEFAULT_FRACTIONS),
        help="mono-src,mono-trg,dev,test fractions (sum to 1)",
    )
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model (baseline or retrain schedule)")
    t.add_argument("--config", required=True, help="experiment config JSON")
    t.add_argument("--mode", choices=("baseline", "retrain"))
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int, help="override config seed")
    t.add_argument("--switch", type=int, help="override phase boundary M")
    t.set_defaults(func=cmd_train)

    tr = sub.add_parser("translate", help="greedy-translate a corpus file")
    tr.add_argument("--ckpt", required=True)
    tr.add_argument("--input", required=True)
    tr.add_argument("--direction", required=True, help="<from_lang>:<to_lang>")
    tr.add_argument("--out", required=True)
    tr.add_argument("--attn-dir", help="write per-sentence attention CSVs here")
    tr.add_argument("--max-len", type=int)
    tr.set_defaults(func=cmd_translate)

    e = sub.add_parser("evaluate", help="BLEU report for a hypothesis file")
    e.add_argument("--hyp", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--tau1", type=float, default=0.6)
    e.add_argument("--tau2", type=float, default=0.3)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("significance", help="paired bootstrap test: does B beat A?")
    s.add_argument("--hyp-a", required=True)
    s.add_argument("--hyp-b", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--samples", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_significance)

    d = sub.add_parser("diagnose", help="per-sentence scrambled-output flags")
    d.add_argument("--hyp", required=True)
    d.add_argument("--ref", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--tau1", type=float, default=0.6)
    d.add_argument("--tau2", type=float, default=0.3)
    d.set_defaults(func=cmd_diagnose)

    h = sub.add_parser("heatmap", help="attention heatmap CSV for one sentence")
    h.add_argument("--ckpt", required=True)
    h.add_argument("--sentence", required=True)
    h.add_argument("--direction", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--max-len", type=int)
    h.set_defaults(func=cmd_heatmap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
