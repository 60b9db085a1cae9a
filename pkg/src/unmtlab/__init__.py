"""Desk-scale laboratory for denoising-based unsupervised machine translation.

Implements the shuffle-noise DAE + iterative back-translation baseline, the
two-phase retraining schedule that drops the noise halfway, and the
measurement kit for the scrambled-translation failure mode: multi-bleu
scoring with per-order decomposition, paired bootstrap significance,
sentence-level scramble flags, and attention-entropy heatmap export.
"""

from .corpus import (
    EOS,
    PAD,
    SOS,
    UNK,
    CorpusSplits,
    LanguagePairSpec,
    Sentence,
    Vocabulary,
    default_pair_spec,
    generate_corpus,
    oracle_embeddings,
    split_corpora,
)
from .diffcore import Raw, Tape, finite_diff_check, sgd_step
from .evaluation import (
    BleuReport,
    BootstrapResult,
    corpus_bleu,
    delta_table,
    export_heatmap,
    individual_ngram_bleu,
    paired_bootstrap,
    scramble_diagnose,
    scramble_fraction,
)
from .model import Model, ModelConfig, decoder_loss, encode, gradient_check, translate
from .noise import SwapPlan, make_swap_plan, shuffle
from .training import CurvePoint, SubTask, TrainConfig, make_schedule, run_subtask, train

__version__ = "0.1.0"
