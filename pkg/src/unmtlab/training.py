"""Two-phase UNMT training loop.

Baseline mode rotates [DAE_src, DAE_trg, BTS_src, BTS_trg] for all N
iterations (one iteration = one full rotation, one gradient step per
sub-task). Retrain mode runs the same rotation through iteration M, then
switches to the noise-free rotation [AE_src, AE_trg, BT_src, BT_trg] for
M+1..N. Back-translation is on the fly: synthetic inputs always come from the
current parameters, never a cache.

Sub-task naming follows the convention that the suffix is the language of the
*input* side; the trained decoder is always the output language's decoder:

    DAE_src / AE_src   src corpus, (noisy) src in, src out, src decoder
    BTS_src / BT_src   trg corpus, synthetic src in, trg out, trg decoder
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import noise
from .corpus import EOS, UNK, CorpusSplits, Sentence, Vocabulary
from .diffcore import NonFiniteError, sgd_step
from .evaluation import corpus_bleu
from .model import Model, ModelConfig, decoder_loss, save_checkpoint, translate
from .seeding import INIT, NOISE, SAMPLE_SRC, SAMPLE_TRG, rng_for

__all__ = [
    "SubTask",
    "NOISY_ROTATION",
    "CLEAN_ROTATION",
    "TrainConfig",
    "TrainingError",
    "TrainingDiverged",
    "CurvePoint",
    "TrainResult",
    "make_schedule",
    "run_subtask",
    "train",
    "write_curve_csv",
]


class SubTask(enum.Enum):
    DAE_SRC = "DAE_src"
    DAE_TRG = "DAE_trg"
    BTS_SRC = "BTS_src"
    BTS_TRG = "BTS_trg"
    AE_SRC = "AE_src"
    AE_TRG = "AE_trg"
    BT_SRC = "BT_src"
    BT_TRG = "BT_trg"


NOISY_ROTATION = (SubTask.DAE_SRC, SubTask.DAE_TRG, SubTask.BTS_SRC, SubTask.BTS_TRG)
CLEAN_ROTATION = (SubTask.AE_SRC, SubTask.AE_TRG, SubTask.BT_SRC, SubTask.BT_TRG)

_USES_NOISE = frozenset(NOISY_ROTATION)
_BACK_TRANSLATION = frozenset(
    (SubTask.BTS_SRC, SubTask.BTS_TRG, SubTask.BT_SRC, SubTask.BT_TRG)
)
# output side == corpus the batch is drawn from == decoder being trained
_OUTPUT_SIDE = {
    SubTask.DAE_SRC: "src",
    SubTask.AE_SRC: "src",
    SubTask.BTS_TRG: "src",
    SubTask.BT_TRG: "src",
    SubTask.DAE_TRG: "trg",
    SubTask.AE_TRG: "trg",
    SubTask.BTS_SRC: "trg",
    SubTask.BT_SRC: "trg",
}


def uses_noise(task: SubTask) -> bool:
    return task in _USES_NOISE


def is_back_translation(task: SubTask) -> bool:
    return task in _BACK_TRANSLATION


def output_side(task: SubTask) -> str:
    return _OUTPUT_SIDE[task]


class TrainingError(ValueError):
    """Invalid training configuration or task/corpus mismatch."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss; carries the iteration and sub-task it happened in."""

    def __init__(self, iteration: int, task: SubTask):
        super().__init__(f"non-finite loss at iteration {iteration}, task {task.value}")
        self.iteration = iteration
        self.task = task


@dataclass
class TrainConfig:
    """Schedule and optimizer knobs; `switch` is the phase boundary M."""

    iterations: int
    switch: int | None = None  # defaults to iterations // 2
    eval_every: int | None = None  # defaults to iterations (one final eval)
    lr: float = 0.05
    clip_norm: float = 5.0
    batch_size: int = 8
    max_len: int = 20
    seed: int = 0
    mode: str = "baseline"
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.iterations < 2:
            raise TrainingError("need at least 2 iterations (0 < M < N)")
        if self.switch is None:
            self.switch = self.iterations // 2
        if not 0 < self.switch < self.iterations:
            raise TrainingError(
                f"switch must satisfy 0 < M < N, got M={self.switch}, N={self.iterations}"
            )
        if self.eval_every is None:
            self.eval_every = self.iterations
        if self.eval_every < 1 or self.iterations % self.eval_every != 0:
            raise TrainingError(
                f"eval_every ({self.eval_every}) must divide iterations ({self.iterations})"
            )
        if self.mode not in ("baseline", "retrain"):
            raise TrainingError(f"unknown mode {self.mode!r}")
        if self.lr <= 0 or self.clip_norm <= 0:
            raise TrainingError("lr and clip_norm must be positive")
        if self.batch_size < 1 or self.max_len < 1:
            raise TrainingError("batch_size and max_len must be >= 1")
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)


@dataclass(frozen=True)
class CurvePoint:
    iteration: int
    direction: str  # "<from_lang>:<to_lang>"
    bleu: float


@dataclass
class TrainResult:
    model: Model
    curve: list[CurvePoint]
    checkpoints: dict[int, Model]
    checkpoint_paths: dict[int, str]


def make_schedule(config: TrainConfig):
    """Flat iterator of sub-tasks; each consecutive four form one iteration."""
    for i in range(1, config.iterations + 1):
        if config.mode == "retrain" and i > config.switch:
            yield from CLEAN_ROTATION
        else:
            yield from NOISY_ROTATION


class EpochSampler:
    """Without-replacement index batches, reshuffled per epoch (seeded).

    Batches never skip indices: a partial epoch tail is completed from the
    next epoch's permutation.
    """

    def __init__(self, n: int, rng: np.random.Generator):
        if n < 1:
            raise TrainingError("cannot sample from an empty corpus")
        self._n = n
        self._rng = rng
        self._buffer: list[int] = []

    def next_batch(self, k: int) -> list[int]:
        while len(self._buffer) < k:
            self._buffer.extend(int(i) for i in self._rng.permutation(self._n))
        out, self._buffer = self._buffer[:k], self._buffer[k:]
        return out


def run_subtask(
    task: SubTask,
    batch: list[Sentence],
    model: Model,
    config: TrainConfig,
    noise_rng: np.random.Generator,
) -> float:
    """One gradient step of one sub-task on one batch; returns the mean loss.

    The batch must come from the monolingual corpus of the task's output
    language. Back-translation sub-tasks translate each sentence with the
    current parameters (read-only), optionally shuffle the synthetic input
    (BTS only), and train the output decoder to reconstruct the original.
    """
    if not batch:
        raise TrainingError("empty batch")
    out_lang = model.langs[0] if _OUTPUT_SIDE[task] == "src" else model.langs[1]
    in_lang = model.other_lang(out_lang) if is_back_translation(task) else out_lang
    for sent in batch:
        if sent.lang != out_lang:
            raise TrainingError(
                f"task/corpus language mismatch: {task.value} needs {out_lang!r} "
                f"sentences, got {sent.lang!r}"
            )

    acc: dict[str, np.ndarray] = {}
    total = 0.0
    for sent in batch:
        if is_back_translation(task):
            syn = translate(sent, (out_lang, in_lang), model, config.max_len).sentence
            if len(syn) == 0:
                syn = Sentence(in_lang, (UNK,))  # encoder rejects empty input
            inp = syn
        else:
            inp = sent
        if uses_noise(task):
            plan = noise.make_swap_plan(len(inp), noise_rng)
            inp = noise.shuffle(inp, plan)
        tgt = Sentence(out_lang, sent.ids + (EOS,))
        res = decoder_loss(inp, tgt, out_lang, model)
        grads = res.tape.backward(res.node)
        for name, nid in res.param_nodes.items():
            g = grads[nid]
            if name in acc:
                acc[name] += g
            else:
                acc[name] = g
        total += res.value

    b = float(len(batch))
    for name in acc:
        acc[name] /= b
    sgd_step(model.params, acc, config.lr, config.clip_norm)
    return total / b


def _dev_bleu(model: Model, dev, direction: tuple[str, str], max_len: int) -> float:
    frm, to = direction
    side_in = dev.src if model.langs[0] == frm else dev.trg
    side_ref = dev.trg if model.langs[0] == frm else dev.src
    hyps = [translate(s, direction, model, max_len).sentence.ids for s in side_in]
    refs = [r.ids for r in side_ref]
    return corpus_bleu(hyps, refs).bleu


def train(
    config: TrainConfig,
    splits: CorpusSplits,
    vocabs: dict[str, Vocabulary],
    embeddings: dict[str, np.ndarray],
    out_dir=None,
) -> TrainResult:
    """Run the schedule; checkpoints at M and N, dev BLEU every eval_every.

    Fully deterministic given config.seed: parameter init, batch order and
    noise plans all flow from named sub-seeds of it.
    """
    langs = (splits.mono_src.lang, splits.mono_trg.lang)
    model = Model.build(
        config.model, vocabs, langs, embeddings, rng_for(config.seed, INIT)
    )
    noise_rng = rng_for(config.seed, NOISE)
    samplers = {
        "src": EpochSampler(len(splits.mono_src.sentences), rng_for(config.seed, SAMPLE_SRC)),
        "trg": EpochSampler(len(splits.mono_trg.sentences), rng_for(config.seed, SAMPLE_TRG)),
    }
    corpora = {"src": splits.mono_src, "trg": splits.mono_trg}

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    curve: list[CurvePoint] = []
    checkpoints: dict[int, Model] = {}
    checkpoint_paths: dict[int, str] = {}
    schedule = make_schedule(config)

    for iteration in range(1, config.iterations + 1):
        for _ in range(4):
            task = next(schedule)
            side = _OUTPUT_SIDE[task]
            idx = samplers[side].next_batch(config.batch_size)
            batch = [corpora[side].sentences[j] for j in idx]
            try:
                loss = run_subtask(task, batch, model, config, noise_rng)
            except NonFiniteError as err:
                raise TrainingDiverged(iteration, task) from err
            if not math.isfinite(loss):
                raise TrainingDiverged(iteration, task)

        if iteration % config.eval_every == 0:
            for direction in ((langs[0], langs[1]), (langs[1], langs[0])):
                bleu = _dev_bleu(model, splits.dev, direction, config.max_len)
                curve.append(
                    CurvePoint(iteration, f"{direction[0]}:{direction[1]}", bleu)
                )

        if iteration in (config.switch, config.iterations):
            checkpoints[iteration] = model.copy()
            if out_path is not None:
                path = out_path / f"ckpt_{iteration}"
                save_checkpoint(
                    path,
                    model,
                    train_config=asdict(config),
                    rng_states={"noise": noise_rng.bit_generator.state},
                )
                checkpoint_paths[iteration] = str(path)

    return TrainResult(
        model=model,
        curve=curve,
        checkpoints=checkpoints,
        checkpoint_paths=checkpoint_paths,
    )


def write_curve_csv(path, curve: list[CurvePoint]) -> None:
    lines = ["iteration,direction,bleu"]
    lines += [f"{p.iteration},{p.direction},{p.bleu:.4f}" for p in curve]
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")
