"""A compressed run of the main experiment: noisy phase vs clean retraining.

Trains two models on a small synthetic corpus with identical seeds: one stays
on the noisy schedule (DAE + shuffled back-translation) for all N iterations,
the other switches to clean auto-encoding + back-translation at M = N/2. The
printed curves show the post-switch gap opening. Scale everything up with the
CLI (configs/desk.json) for the full effect; this demo favours speed.

Runtime: roughly two minutes on a laptop CPU.
"""
import numpy as np

from unmtlab import corpus as cp
from unmtlab.model import ModelConfig, params_equal
from unmtlab.seeding import DATA, EMBEDDINGS, rng_for
from unmtlab.training import TrainConfig, train

SEED = 5
N, M = 800, 400

spec = cp.default_pair_spec()
rng = rng_for(SEED, DATA)
pairs = cp.generate_corpus(spec, 3000, rng)
vs, vt = cp.build_vocabularies(spec)
splits = cp.split_corpora(cp.encode_pairs(pairs, vs, vt), (0.42, 0.42, 0.05, 0.11), rng)
vocabs = {"src": vs, "trg": vt}
emb = cp.oracle_embeddings(vs, vt, spec.cipher, 24, rng_for(SEED, EMBEDDINGS))

results = {}
for mode in ("baseline", "retrain"):
    cfg = TrainConfig(
        iterations=N, switch=M, eval_every=100, lr=0.8, clip_norm=5.0,
        batch_size=4, max_len=16, seed=SEED, mode=mode,
        model=ModelConfig(emb_dim=24, hidden=32, att_dim=32),
    )
    print(f"training {mode} (N={N}, M={M})...")
    results[mode] = train(cfg, splits, vocabs, emb)

same_at_m = params_equal(results["baseline"].checkpoints[M], results["retrain"].checkpoints[M])
print(f"\nphase 1 identical across modes (checkpoint at M): {same_at_m}")

print("\ndev BLEU curves (src:trg direction):")
print(f"{'iter':>6} {'baseline':>9} {'retrain':>8}")
base = {p.iteration: p.bleu for p in results["baseline"].curve if p.direction == "src:trg"}
retr = {p.iteration: p.bleu for p in results["retrain"].curve if p.direction == "src:trg"}
for it in sorted(base):
    marker = "  <- switch" if it == M else ""
    print(f"{it:>6} {base[it]:>9.2f} {retr[it]:>8.2f}{marker}")
