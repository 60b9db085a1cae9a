"""The synthetic language pair, up close.

Samples parallel sentences from the shipped template grammar, shows the word
cipher, the corpus splits (with the unsupervised-hygiene guarantee), and the
oracle cross-lingual embeddings.
"""
import numpy as np

from unmtlab import corpus as cp

spec = cp.default_pair_spec()
print(f"{len(spec.templates)} templates, lengths {min(len(t) for t in spec.templates)}"
      f"-{max(len(t) for t in spec.templates)}")
print(f"categories: " + ", ".join(f"{c}({len(w)})" for c, w in spec.categories.items()))

rng = np.random.default_rng(4)
pairs = cp.generate_corpus(spec, 6, rng)
print("\nsampled parallel pairs (word-for-word cipher, same order):")
for src, trg in pairs:
    print("  src |", " ".join(src))
    print("  trg |", " ".join(trg))

some = sorted(spec.cipher.items())[:8]
print("\ncipher fragment:", ", ".join(f"{a}->{b}" for a, b in some))

# splits: each training side comes from different underlying pairs
vs, vt = cp.build_vocabularies(spec)
encoded = cp.encode_pairs(cp.generate_corpus(spec, 1000, rng), vs, vt)
splits = cp.split_corpora(encoded, (0.4, 0.4, 0.1, 0.1), rng)
overlap = set(splits.mono_src.pair_ids) & set(splits.mono_trg.pair_ids)
print(f"\nsplit sizes: mono {len(splits.mono_src.sentences)}/{len(splits.mono_trg.sentences)}, "
      f"dev {len(splits.dev.src)}, test {len(splits.test.src)}")
print(f"pairs contributing both training sides: {len(overlap)} (must be 0)")

# oracle embeddings: cipher images share their preimage's vector
emb = cp.oracle_embeddings(vs, vt, spec.cipher, dim=16, rng=rng)
w = spec.src_words()[0]
i, j = vs.id_of(w), vt.id_of(spec.cipher[w])
print(f"\nembedding('{w}') == embedding('{spec.cipher[w]}'): "
      f"{np.array_equal(emb['src'][i], emb['trg'][j])}")
norms = np.linalg.norm(emb["src"][4:], axis=1)
print(f"unit norms: max deviation {np.abs(norms - 1).max():.2e}")
