"""Training orchestration.

Phase one is denoising-autoencoder pretraining of the shared model (each
step interleaves one source and one target batch, so the step loss is the
two-language language-modeling objective; with oracle-dictionary
initialization a word-by-word translation term is mixed in as the
stand-in for a learned cross-lingual prior). Phase two depends on the
mode:

* ``extract-edit``: strict 1:1 alternation between an evaluation-network
  update (ranking edited real sentences above the translation) and a
  shared encoder/decoder update (language modeling plus the comparative
  ranking loss, whose gradients reach the encoder side only since both
  decoding passes are non-differentiable).
* ``back-translation``: baseline; reconstruction NLL on greedy pseudo
  pairs plus the same language-modeling term.
* ``mle-retrain``: supervised MLE on (source, top-1 edited) pairs read
  from an extraction dump; used for ablation comparisons.

Everything runs off one RNG stream captured in TrainState, so a run can
checkpoint and resume bit-exactly (the embedding-index snapshots are part
of the checkpoint for exactly this reason).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import load_json, load_tensors, save_json, save_tensors
from .engine import (
    EmbeddingIndex,
    EvaluationNetwork,
    ExtractionResult,
    build_index,
    edit_batch,
    extract_topk_batch,
    score_candidates_batch,
)
from .model import SRC, TGT, ModelConfig, TranslationModel
from .optim import Adam, TrainingDivergenceError
from .tensor import Tape, Tensor
from .text import Corpus, Vocabulary, apply_noise

__all__ = [
    "MODES",
    "TrainConfig",
    "Trainer",
    "METRIC_COLUMNS",
    "comparative_loss_from_sentences",
    "evaluator_loss_from_sentences",
]

MODES = ("extract-edit", "back-translation", "mle-retrain")

METRIC_COLUMNS = ("step", "mode", "loss_total", "loss_lm", "loss_com",
                  "loss_R", "D_s2t", "D_t2s", "skipped")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "extract-edit"
    seed: int = 0
    hidden_size: int = 64
    layers: int = 2
    eval_hidden: int = 64
    eval_out: int = 64
    max_len: int = 20
    batch_size: int = 32
    lr: float = 3e-4
    lr_evaluator: float = 3e-4
    omega_lm: float = 1.0
    omega_com: float = 1.0
    lam: float = 0.5
    k: int = 10
    episode_len: int = 50
    pretrain_steps: int = 2000
    main_steps: int = 3000
    p_drop: float = 0.1
    shuffle_window: int = 3
    init_mode: str = "oracle"
    valid_interval: int = 200
    checkpoint_interval: int = 1000

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.omega_lm < 0 or self.omega_com < 0:
            raise ValueError("loss weights must be >= 0")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.main_steps < 0 or self.pretrain_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.init_mode not in ("oracle", "random"):
            raise ValueError(f"init_mode must be oracle or random, got {self.init_mode!r}")
        if self.episode_len < 1:
            raise ValueError("episode_len must be >= 1")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# loss builders shared by the trainer and the gradient-check tests


def comparative_loss_from_sentences(source, t_star, edited, model: TranslationModel,
                                    evaluator: EvaluationNetwork, lam: float) -> Tensor:
    """Comparative ranking loss for one source with fixed candidate sentences.

    The translation and the edited sentences are given (the decoding that
    produced them is not differentiable); this recomputes their embeddings
    differentiably and returns -log of the translation's ranking
    probability among the edited candidates plus itself.
    """
    _, e_s = model.encode(source)
    _, e_t = model.encode(t_star)
    cand = [model.encode(e)[1] for e in edited] + [e_t]
    d = model.config.hidden_size
    probs = score_candidates_batch(
        T.reshape(e_s, (1, d)),
        T.reshape(T.stack(cand, axis=0), (1, len(cand), d)),
        evaluator, lam,
    )
    return -T.reshape(T.log(T.gather(probs, np.array([[len(cand) - 1]]))), ())


def evaluator_loss_from_sentences(source, t_star, edited, model: TranslationModel,
                                  evaluator: EvaluationNetwork, lam: float) -> Tensor:
    """Evaluation-network loss for one source with fixed candidates.

    Embeddings are computed forward-only (the encoder is frozen in this
    pass); gradients reach the evaluation network alone. The ranking
    denominator still includes the translation.
    """
    with T.no_grad():
        _, e_s = model.encode(source)
        cand_np = np.stack([model.encode(e)[1].data for e in edited]
                           + [model.encode(t_star)[1].data])
    k = len(edited)
    probs = score_candidates_batch(
        Tensor(e_s.data[None, :]),
        Tensor(cand_np[None, :, :]),
        evaluator, lam,
    )
    logp = T.log(T.slice_axis(probs, 1, 0, k))
    return -T.tmean(logp)


# ---------------------------------------------------------------------------


@dataclass
class _DirectionBatch:
    """Everything one direction of an alternation step shares between the
    evaluator update and the generator update."""

    sources: list[np.ndarray]
    out_lang: int
    t_star: list[np.ndarray]
    extracted_idx: np.ndarray  # (B, k)
    extracted_dist: np.ndarray
    edited: list[np.ndarray]  # B*k sentences, row-major
    skipped: int


@dataclass
class TrainState:
    step: int = 0
    episode: int = -1
    skipped_total: int = 0
    best_step: int = -1
    best_d: float = -np.inf
    metric_rows: list[list[str]] = field(default_factory=list)


class Trainer:
    """Owns the model, the evaluation network, their optimizers, and the
    full training/validation/checkpoint lifecycle for one run."""

    def __init__(self, config: TrainConfig, vocab: Vocabulary,
                 src_train: Corpus, tgt_train: Corpus,
                 src_valid: Corpus | None = None, tgt_valid: Corpus | None = None,
                 oracle_dictionary: np.ndarray | None = None):
        config.validate()
        if config.init_mode == "oracle" and oracle_dictionary is None:
            raise ValueError("init_mode=oracle requires an oracle dictionary")
        self.config = config
        self.vocab = vocab
        self.corpora = {SRC: src_train, TGT: tgt_train}
        self.valid = {SRC: src_valid, TGT: tgt_valid}
        self.dictionary = oracle_dictionary
        self.inv_dictionary = None
        if oracle_dictionary is not None:
            inv = np.empty_like(oracle_dictionary)
            inv[oracle_dictionary] = np.arange(len(oracle_dictionary))
            self.inv_dictionary = inv

        self.rng = np.random.default_rng(config.seed)
        self.model = TranslationModel(
            ModelConfig(vocab_size=vocab.size, hidden_size=config.hidden_size,
                        layers=config.layers, max_len=config.max_len),
            self.rng,
        )
        self.evaluator = EvaluationNetwork(config.hidden_size, self.rng,
                                           hidden=config.eval_hidden,
                                           d_out=config.eval_out)
        self.opt_gen = Adam(self.model.named_parameters(), lr=config.lr)
        self.opt_eval = Adam(self.evaluator.named_parameters(), lr=config.lr_evaluator)
        self.state = TrainState()
        self.indexes: dict[int, EmbeddingIndex] = {}

    # -- batching ------------------------------------------------------------

    def _sample_batch(self, lang: int) -> list[np.ndarray]:
        corpus = self.corpora[lang]
        idx = self.rng.integers(0, len(corpus), size=self.config.batch_size)
        return [corpus[int(i)] for i in idx]

    def _noised(self, batch: list[np.ndarray]) -> list[np.ndarray]:
        cfg = self.config
        return [apply_noise(s, cfg.p_drop, cfg.shuffle_window, self.rng) for s in batch]

    def _draw_lm_batches(self):
        """Batch + noise draws shared by every step type, in a fixed RNG order."""
        batch_s = self._sample_batch(SRC)
        batch_t = self._sample_batch(TGT)
        return batch_s, self._noised(batch_s), batch_t, self._noised(batch_t)

    def _word_translate(self, batch: list[np.ndarray], to_lang: int) -> list[np.ndarray]:
        table = self.dictionary if to_lang == TGT else self.inv_dictionary
        return [table[s] for s in batch]

    # -- language modeling / pretraining --------------------------------------

    def _lm_loss(self, noised_s, batch_s, noised_t, batch_t) -> Tensor:
        """Two-language denoising autoencoding loss."""
        return (self.model.nll_batch(noised_s, batch_s, SRC)
                + self.model.nll_batch(noised_t, batch_t, TGT))

    def pretrain_step(self) -> None:
        cfg = self.config
        batch_s, noised_s, batch_t, noised_t = self._draw_lm_batches()
        self.opt_gen.zero_grad()
        with Tape() as tape:
            loss_lm = self._lm_loss(noised_s, batch_s, noised_t, batch_t)
            if cfg.init_mode == "oracle":
                loss_lm = loss_lm + (
                    self.model.nll_batch(noised_s, self._word_translate(batch_s, TGT), TGT)
                    + self.model.nll_batch(noised_t, self._word_translate(batch_t, SRC), SRC)
                )
            total = loss_lm * cfg.omega_lm
        self._check_loss(total)
        tape.backward(total)
        self.opt_gen.step()
        self.state.step += 1
        self._append_row("pretrain", total=total.item(), lm=loss_lm.item())

    # -- episodes and indexes --------------------------------------------------

    def _current_episode(self) -> int:
        """Episode id of the current main-phase step (0-based)."""
        in_phase = max(self.state.step - self.config.pretrain_steps, 0)
        return in_phase // self.config.episode_len

    def _ensure_indexes(self) -> None:
        episode = self._current_episode()
        for lang in (SRC, TGT):
            idx = self.indexes.get(lang)
            if idx is None or idx.is_stale(episode):
                self.indexes[lang] = build_index(self.corpora[lang], self.model, episode)
        self.state.episode = episode

    # -- extract-edit ----------------------------------------------------------

    def _prepare_direction(self, sources: list[np.ndarray], out_lang: int) -> _DirectionBatch:
        """Non-differentiable half of a step: translate, extract, edit."""
        cfg = self.config
        t_star, _ = self.model.translate_batch(sources, out_lang)
        keep = [i for i, s in enumerate(t_star) if len(s) > 0]
        skipped = len(sources) - len(keep)
        if skipped:
            sources = [sources[i] for i in keep]
            t_star = [t_star[i] for i in keep]
        with T.no_grad():
            _, pooled, _ = self.model.encode_batch(sources)
        e_src = pooled.data
        index = self.indexes[out_lang]
        idxs, dists = extract_topk_batch(e_src, index, cfg.k)
        corpus = self.corpora[out_lang]
        flat = [corpus[int(j)] for row in idxs for j in row]
        edited = edit_batch(np.repeat(e_src, cfg.k, axis=0), flat, self.model, out_lang,
                            max_len=cfg.max_len)
        return _DirectionBatch(sources=sources, out_lang=out_lang, t_star=t_star,
                               extracted_idx=idxs, extracted_dist=dists,
                               edited=edited, skipped=skipped)

    def _encode_directions(self, directions: list[_DirectionBatch]
                           ) -> list[tuple[Tensor, Tensor]]:
        """(source embeddings (B,d), candidates (B,k+1,d)) per direction.

        All sentences of all directions are encoded as one batch; the
        translation occupies the last candidate slot. Differentiable when
        called under a tape; both updates of a step share this encode (the
        evaluator update detaches it, the generator update backprops it).
        """
        cfg = self.config
        sents: list[np.ndarray] = []
        spans = []
        for d in directions:
            spans.append((len(sents), len(d.sources)))
            sents.extend(d.sources)
            sents.extend(d.edited)
            sents.extend(d.t_star)
        _, pooled, _ = self.model.encode_batch(sents)
        out = []
        dh = cfg.hidden_size
        for start, b in spans:
            e_s = T.slice_axis(pooled, 0, start, start + b)
            e_edit = T.slice_axis(pooled, 0, start + b, start + b + b * cfg.k)
            e_star = T.slice_axis(pooled, 0, start + b + b * cfg.k,
                                  start + b * (cfg.k + 2))
            cand = T.concat(
                [T.reshape(e_edit, (b, cfg.k, dh)), T.reshape(e_star, (b, 1, dh))],
                axis=1,
            )
            out.append((e_s, cand))
        return out

    def _update_evaluator(self, embeds: list[tuple[Tensor, Tensor]]) -> float:
        """Evaluator update on detached embeddings (the encoder is frozen);
        ranks the edited candidates above the translation."""
        cfg = self.config
        self.opt_eval.zero_grad()
        with Tape() as tape:
            loss = None
            for e_s, cand in embeds:
                probs = score_candidates_batch(e_s, cand, self.evaluator, cfg.lam)
                term = -T.tmean(T.log(T.slice_axis(probs, 1, 0, cfg.k)))
                loss = term if loss is None else loss + term
        self._check_loss(loss)
        tape.backward(loss)
        self.opt_eval.step()
        return loss.item()

    def _update_generator(self, lm_batches, embeds: list[tuple[Tensor, Tensor]],
                          gen_tape: Tape) -> tuple[float, float, float]:
        """Encoder/decoder update: language modeling plus the comparative
        ranking loss. The evaluator participates in the forward pass but its
        gradients are discarded (frozen in this pass); the decoder receives
        gradient only from the language-modeling term since every decode in
        the candidate pipeline is non-differentiable."""
        cfg = self.config
        batch_s, noised_s, batch_t, noised_t = lm_batches
        self.opt_eval.zero_grad()
        with gen_tape:
            loss_lm = self._lm_loss(noised_s, batch_s, noised_t, batch_t)
            com_val = 0.0
            if cfg.omega_com > 0 and embeds:
                loss_com = None
                for e_s, cand in embeds:
                    probs = score_candidates_batch(e_s, cand, self.evaluator, cfg.lam)
                    picked = T.gather(probs, np.full((e_s.data.shape[0], 1), cfg.k))
                    term = -T.tmean(T.log(picked))
                    loss_com = term if loss_com is None else loss_com + term
                total = loss_lm * cfg.omega_lm + loss_com * cfg.omega_com
                com_val = loss_com.item()
            else:
                total = loss_lm * cfg.omega_lm
        self._check_loss(total)
        gen_tape.backward(total)
        self.opt_gen.step()
        self.opt_eval.zero_grad()  # R stays frozen in this pass
        return total.item(), loss_lm.item(), com_val

    def adversarial_step(self) -> None:
        """One 1:1 alternation: evaluator update, then encoder/decoder update,
        both directions handled symmetrically inside the step."""
        self._ensure_indexes()
        lm_batches = self._draw_lm_batches()
        batch_s, _, batch_t, _ = lm_batches
        directions = [d for d in (self._prepare_direction(batch_s, TGT),
                                  self._prepare_direction(batch_t, SRC))
                      if d.sources]
        skipped = sum(d.skipped for d in directions)
        self.opt_gen.zero_grad()
        gen_tape = Tape()
        with gen_tape:
            embeds = self._encode_directions(directions)
        loss_r = self._update_evaluator(
            [(Tensor(e.data), Tensor(c.data)) for e, c in embeds])
        total, lm, com = self._update_generator(lm_batches, embeds, gen_tape)
        self.state.step += 1
        self.state.skipped_total += skipped
        self._append_row("extract-edit", total=total, lm=lm, com=com,
                         loss_r=loss_r, skipped=skipped)

    # -- back-translation baseline ----------------------------------------------

    def backtranslation_step(self) -> None:
        """Pseudo pairs from greedy decoding, then reconstruction MLE plus LM."""
        cfg = self.config
        lm_batches = self._draw_lm_batches()
        batch_s, noised_s, batch_t, noised_t = lm_batches
        t_hat, _ = self.model.translate_batch(batch_s, TGT)
        s_hat, _ = self.model.translate_batch(batch_t, SRC)
        self.opt_gen.zero_grad()
        with Tape() as tape:
            loss_lm = self._lm_loss(noised_s, batch_s, noised_t, batch_t)
            loss_bt = (self.model.nll_batch(t_hat, batch_s, SRC)
                       + self.model.nll_batch(s_hat, batch_t, TGT))
            total = loss_lm * cfg.omega_lm + loss_bt * cfg.omega_com
        self._check_loss(total)
        tape.backward(total)
        self.opt_gen.step()
        self.state.step += 1
        self._append_row("back-translation", total=total.item(), lm=loss_lm.item(),
                         com=loss_bt.item())

    # -- MLE retraining ablation --------------------------------------------------

    def mle_step(self, pairs: list[tuple[np.ndarray, np.ndarray]]) -> None:
        """Supervised MLE on (source, top-1 edited) pairs."""
        cfg = self.config
        idx = self.rng.integers(0, len(pairs), size=cfg.batch_size)
        batch = [pairs[int(i)] for i in idx]
        self.opt_gen.zero_grad()
        with Tape() as tape:
            loss = self.model.nll_batch([s for s, _ in batch], [t for _, t in batch], TGT)
            total = loss * cfg.omega_com
        self._check_loss(total)
        tape.backward(total)
        self.opt_gen.step()
        self.state.step += 1
        self._append_row("mle-retrain", total=total.item(), com=loss.item())

    def extraction_pairs(self, results: list[ExtractionResult]) -> list:
        pairs = []
        for r in results:
            if len(r.edited) and len(r.edited[0]) > 0:
                pairs.append((self.corpora[SRC][r.source_index], r.edited[0]))
        if not pairs:
            raise ValueError("extraction dump contains no usable pairs")
        return pairs

    # -- extraction dumps ----------------------------------------------------------

    def extract_corpus(self, limit: int | None = None) -> list[ExtractionResult]:
        """Top-k extractions plus edits for every source sentence (or a prefix)."""
        self._ensure_indexes()
        cfg = self.config
        corpus = self.corpora[SRC]
        n = len(corpus) if limit is None else min(limit, len(corpus))
        out: list[ExtractionResult] = []
        for start in range(0, n, cfg.batch_size):
            rows = list(range(start, min(start + cfg.batch_size, n)))
            sents = [corpus[i] for i in rows]
            with T.no_grad():
                _, pooled, _ = self.model.encode_batch(sents)
            idxs, dists = extract_topk_batch(pooled.data, self.indexes[TGT], cfg.k)
            flat = [self.corpora[TGT][int(j)] for row in idxs for j in row]
            edited = edit_batch(np.repeat(pooled.data, cfg.k, axis=0), flat,
                                self.model, TGT, max_len=cfg.max_len)
            for bi, src_i in enumerate(rows):
                out.append(ExtractionResult(
                    source_index=src_i,
                    indices=idxs[bi],
                    distances=dists[bi],
                    edited=edited[bi * cfg.k : (bi + 1) * cfg.k],
                ))
        return out

    # -- model selection ------------------------------------------------------------

    def model_selection_score(self, direction: str = "s2t",
                              batch_size: int = 64) -> float:
        """Mean log ranking probability of greedy translations on held-out
        monolingual data; higher is better. Order-invariant."""
        in_lang, out_lang = (SRC, TGT) if direction == "s2t" else (TGT, SRC)
        corpus = self.valid[in_lang]
        if corpus is None:
            raise ValueError(f"no validation corpus for direction {direction}")
        self._ensure_indexes()
        cfg = self.config
        total = 0.0
        count = 0
        for start in range(0, len(corpus), batch_size):
            sents = corpus.sentences[start : start + batch_size]
            batch = self._prepare_direction(sents, out_lang)
            if not batch.sources:
                continue
            with T.no_grad():
                (e_s, cand), = self._encode_directions([batch])
                probs = score_candidates_batch(e_s, cand, self.evaluator, cfg.lam)
                logp = np.log(probs.data[:, cfg.k])
            total += float(logp.sum())
            count += len(batch.sources)
        return total / max(count, 1)

    def validate(self) -> tuple[float, float]:
        d_s2t = self.model_selection_score("s2t")
        d_t2s = self.model_selection_score("t2s")
        mean_d = 0.5 * (d_s2t + d_t2s)
        if mean_d > self.state.best_d:
            self.state.best_d = mean_d
            self.state.best_step = self.state.step
        if self.state.metric_rows:
            last = self.state.metric_rows[-1]
            if last[0] == str(self.state.step):
                last[6] = _fmt(d_s2t)
                last[7] = _fmt(d_t2s)
        return d_s2t, d_t2s

    # -- driver ------------------------------------------------------------------

    def main_step(self, mle_pairs=None) -> None:
        mode = self.config.mode
        if mode == "extract-edit":
            self.adversarial_step()
        elif mode == "back-translation":
            self.backtranslation_step()
        else:
            if mle_pairs is None:
                raise ValueError("mle-retrain mode needs extraction pairs")
            self.mle_step(mle_pairs)

    def run(self, checkpoint_dir=None, mle_pairs=None, log=None,
            until: int | None = None) -> None:
        """Pretrain, then run the configured mode to its step budget,
        validating and checkpointing at the configured intervals.

        ``until`` stops early at a global step (for interrupt/resume
        exercises) without changing any per-step behavior.
        """
        cfg = self.config
        true_end = cfg.pretrain_steps + cfg.main_steps
        total_steps = true_end if until is None else min(true_end, until)
        while self.state.step < total_steps:
            if self.state.step < cfg.pretrain_steps:
                self.pretrain_step()
            else:
                self.main_step(mle_pairs=mle_pairs)
            at_end = self.state.step == true_end
            want_valid = cfg.valid_interval and (
                self.state.step % cfg.valid_interval == 0 or at_end)
            if want_valid and self.valid[SRC] is not None and self.valid[TGT] is not None \
                    and self.state.step >= cfg.pretrain_steps:
                self.validate()
            want_ckpt = at_end or (cfg.checkpoint_interval
                                   and self.state.step % cfg.checkpoint_interval == 0)
            if checkpoint_dir is not None and want_ckpt:
                self.save_checkpoint(Path(checkpoint_dir) / f"step_{self.state.step:07d}")
            if log is not None and self.state.step % 100 == 0:
                log(self.state.step, self.state.metric_rows[-1])
        if cfg.main_steps == 0 and self.state.best_step < 0:
            # degenerate run: the pretrained model is the best (and only) model
            self.state.best_step = self.state.step

    # -- bookkeeping ----------------------------------------------------------------

    def _check_loss(self, loss: Tensor) -> None:
        if not np.isfinite(loss.data).all():
            raise TrainingDivergenceError("non-finite training loss", self.state.step + 1)

    def _append_row(self, mode: str, total: float, lm: float | None = None,
                    com: float | None = None, loss_r: float | None = None,
                    skipped: int = 0) -> None:
        self.state.metric_rows.append([
            str(self.state.step),
            mode,
            _fmt(total),
            "" if lm is None else _fmt(lm),
            "" if com is None else _fmt(com),
            "" if loss_r is None else _fmt(loss_r),
            "",
            "",
            str(skipped),
        ])

    def metrics_csv(self) -> str:
        lines = [",".join(METRIC_COLUMNS)]
        lines.extend(",".join(row) for row in self.state.metric_rows)
        return "\n".join(lines) + "\n"

    # -- checkpointing -----------------------------------------------------------------

    def save_checkpoint(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        params = {k: p.data for k, p in self.model.named_parameters().items()}
        params.update({k: p.data for k, p in self.evaluator.named_parameters().items()})
        save_tensors(directory / "params.bin", params)
        optim = {f"gen.{k}": v for k, v in self.opt_gen.state_arrays().items()}
        optim.update({f"eval.{k}": v for k, v in self.opt_eval.state_arrays().items()})
        save_tensors(directory / "optim.bin", optim)
        index_arrays = {}
        index_meta = {}
        for lang, name in ((SRC, "src"), (TGT, "tgt")):
            idx = self.indexes.get(lang)
            if idx is not None:
                index_arrays[f"index.{name}"] = idx.rows
                index_meta[name] = idx.episode
        if index_arrays:
            save_tensors(directory / "index.bin", index_arrays)
        save_json(directory / "state.json", {
            "format": 1,
            "step": self.state.step,
            "episode": self.state.episode,
            "skipped_total": self.state.skipped_total,
            "best_step": self.state.best_step,
            "best_d": None if not np.isfinite(self.state.best_d) else self.state.best_d,
            "rng": self.rng.bit_generator.state,
            "opt_gen_steps": self.opt_gen.step_count,
            "opt_eval_steps": self.opt_eval.step_count,
            "metric_rows": self.state.metric_rows,
            "config": asdict(self.config),
            "vocab_content": self.vocab.id_to_token[4:],
            "index_episodes": index_meta,
            "has_dictionary": self.dictionary is not None,
        })
        return directory

    def restore(self, directory, require_same_config: bool = True) -> None:
        """Load a checkpoint into this trainer.

        With ``require_same_config`` (the default) the checkpoint must have
        been written under an identical TrainConfig; sweeps that share a
        pretrained initialization across k values disable the check (array
        shapes are still validated by the parameter load).
        """
        directory = Path(directory)
        meta = load_json(directory / "state.json")
        if require_same_config and meta["config"] != asdict(self.config):
            mismatch = {k for k in meta["config"]
                        if meta["config"][k] != asdict(self.config).get(k)}
            raise ValueError(f"checkpoint config mismatch on keys: {sorted(mismatch)}")
        if meta["vocab_content"] != self.vocab.id_to_token[4:]:
            raise ValueError("checkpoint vocabulary does not match the loaded corpora")
        params = load_tensors(directory / "params.bin")
        live = {**self.model.named_parameters(), **self.evaluator.named_parameters()}
        for k, p in live.items():
            if params[k].shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {k}: "
                                 f"{params[k].shape} vs {p.data.shape}")
            p.data = params[k].copy()
            p.grad = None
        optim = load_tensors(directory / "optim.bin")
        self.opt_gen.load_state_arrays(
            {k[len("gen."):]: v for k, v in optim.items() if k.startswith("gen.")},
            step_count=meta["opt_gen_steps"])
        self.opt_eval.load_state_arrays(
            {k[len("eval."):]: v for k, v in optim.items() if k.startswith("eval.")},
            step_count=meta["opt_eval_steps"])
        self.indexes = {}
        if (directory / "index.bin").exists():
            arrays = load_tensors(directory / "index.bin")
            for lang, name in ((SRC, "src"), (TGT, "tgt")):
                if f"index.{name}" in arrays:
                    self.indexes[lang] = EmbeddingIndex(
                        rows=arrays[f"index.{name}"],
                        episode=meta["index_episodes"][name],
                        lang=name,
                    )
        self.rng.bit_generator.state = meta["rng"]
        self.state = TrainState(
            step=meta["step"],
            episode=meta["episode"],
            skipped_total=meta["skipped_total"],
            best_step=meta["best_step"],
            best_d=-np.inf if meta["best_d"] is None else meta["best_d"],
            metric_rows=[list(r) for r in meta["metric_rows"]],
        )
