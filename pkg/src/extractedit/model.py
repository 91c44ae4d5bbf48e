"""Shared encoder, shared decoder, sentence embeddings, greedy decoding.

One parameter set serves both languages: a single token embedding table
over the joint vocabulary, one encoder GRU stack, one decoder GRU stack
with dot-product attention and an output projection. The decoder learns
which language to emit from a language-tag embedding added to its first
input. Sentence embeddings are element-wise max over the final encoder
layer's hidden states, which composes directly with the max-pool edit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import DegenerateInputError, Tensor
from .text import BOS, EOS, PAD

__all__ = ["SRC", "TGT", "ModelConfig", "GRULayer", "TranslationModel", "pad_batch"]

SRC, TGT = 0, 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    hidden_size: int = 64
    layers: int = 2
    max_len: int = 20


def pad_batch(sentences) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-pad id arrays into (ids (B,T), lengths (B,), valid mask (B,T))."""
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    if np.any(lengths == 0):
        raise DegenerateInputError("cannot batch an empty sentence")
    t_max = int(lengths.max())
    ids = np.full((len(sentences), t_max), PAD, dtype=np.int64)
    for i, s in enumerate(sentences):
        ids[i, : len(s)] = s
    mask = np.arange(t_max)[None, :] < lengths[:, None]
    return ids, lengths, mask


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / sum(shape))
    return rng.uniform(-limit, limit, size=shape)


class GRULayer:
    """One gated-recurrence layer; gate layout [reset | update | candidate]."""

    def __init__(self, w_ih: Tensor, b_ih: Tensor, w_hh: Tensor, b_hh: Tensor):
        self.w_ih = w_ih
        self.b_ih = b_ih
        self.w_hh = w_hh
        self.b_hh = b_hh

    @classmethod
    def create(cls, rng: np.random.Generator, d_in: int, d_h: int) -> "GRULayer":
        return cls(
            Tensor(_glorot(rng, (d_in, 3 * d_h)), requires_grad=True),
            Tensor(np.zeros(3 * d_h), requires_grad=True),
            Tensor(_glorot(rng, (d_h, 3 * d_h)), requires_grad=True),
            Tensor(np.zeros(3 * d_h), requires_grad=True),
        )

    def step(self, x: Tensor, h: Tensor, mask: np.ndarray | None = None) -> Tensor:
        return T.gru_step(x, h, self.w_ih, self.b_ih, self.w_hh, self.b_hh, mask=mask)

    def params(self) -> dict[str, Tensor]:
        return {"w_ih": self.w_ih, "b_ih": self.b_ih, "w_hh": self.w_hh, "b_hh": self.b_hh}


class TranslationModel:
    """Joint-vocabulary seq2seq with shared parameters across languages."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        d = config.hidden_size
        v = config.vocab_size
        self.config = config
        self.embedding = Tensor(rng.uniform(-0.1, 0.1, size=(v, d)), requires_grad=True)
        self.enc_layers = [GRULayer.create(rng, d, d) for _ in range(config.layers)]
        self.dec_layers = [GRULayer.create(rng, d, d) for _ in range(config.layers)]
        self.w_att = Tensor(_glorot(rng, (2 * d, d)), requires_grad=True)
        self.b_att = Tensor(np.zeros(d), requires_grad=True)
        self.w_out = Tensor(_glorot(rng, (d, v)), requires_grad=True)
        self.b_out = Tensor(np.zeros(v), requires_grad=True)
        self.lang_emb = Tensor(rng.uniform(-0.1, 0.1, size=(2, d)), requires_grad=True)

    # -- parameter bookkeeping ------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding}
        for i, layer in enumerate(self.enc_layers):
            for k, p in layer.params().items():
                out[f"encoder.l{i}.{k}"] = p
        for i, layer in enumerate(self.dec_layers):
            for k, p in layer.params().items():
                out[f"decoder.l{i}.{k}"] = p
        out["decoder.attn.w"] = self.w_att
        out["decoder.attn.b"] = self.b_att
        out["decoder.proj.w"] = self.w_out
        out["decoder.proj.b"] = self.b_out
        out["decoder.lang_tag"] = self.lang_emb
        return out

    def encoder_parameters(self) -> dict[str, Tensor]:
        """The embedding table plus the encoder stack (theta_enc)."""
        return {k: p for k, p in self.named_parameters().items()
                if k == "embedding" or k.startswith("encoder.")}

    def decoder_parameters(self) -> dict[str, Tensor]:
        return {k: p for k, p in self.named_parameters().items() if k.startswith("decoder.")}

    # -- encoding -------------------------------------------------------------

    def encode_batch(self, sentences) -> tuple[Tensor, Tensor, np.ndarray]:
        """Encode padded sentences into per-token states and pooled embeddings.

        Returns (H (B,T,d), pooled (B,d), valid mask (B,T)). The pooled
        embedding is invariant to PAD suffixes by construction.
        """
        ids, _, mask = pad_batch(sentences)
        b, t_max = ids.shape
        d = self.config.hidden_size
        fmask = mask.astype(np.float64)
        xs = [T.take_rows(self.embedding, ids[:, t]) for t in range(t_max)]
        for layer in self.enc_layers:
            h = Tensor(np.zeros((b, d)))
            outs = []
            for t in range(t_max):
                h = layer.step(xs[t], h, mask=fmask[:, t : t + 1])
                outs.append(h)
            xs = outs
        h_seq = T.stack(xs, axis=1)
        pooled = T.masked_max(h_seq, mask)
        return h_seq, pooled, mask

    def encode(self, sentence: np.ndarray) -> tuple[Tensor, Tensor]:
        """Single-sentence encode: (hidden states (1,T,d), embedding (d,))."""
        if len(sentence) == 0:
            raise DegenerateInputError("cannot encode an empty sentence")
        h_seq, pooled, _ = self.encode_batch([sentence])
        return h_seq, T.reshape(pooled, (self.config.hidden_size,))

    # -- decoding -------------------------------------------------------------

    def _decoder_step(self, tok_ids: np.ndarray, step: int, hiddens: list[Tensor],
                      lang: int, h_enc: Tensor | None, enc_mask: np.ndarray | None) -> Tensor:
        x = T.take_rows(self.embedding, tok_ids)
        if step == 0:
            x = x + T.take_rows(self.lang_emb, np.full(len(tok_ids), lang))
        inp = x
        for i, layer in enumerate(self.dec_layers):
            hiddens[i] = layer.step(inp, hiddens[i])
            inp = hiddens[i]
        top = hiddens[-1]
        if h_enc is not None:
            ctx = T.attend(top, h_enc, enc_mask)
            top = T.tanh(T.matmul(T.concat([top, ctx], axis=-1), self.w_att) + self.b_att)
        return T.matmul(top, self.w_out) + self.b_out

    def nll_batch(self, src_sentences, tgt_sentences, out_lang: int,
                  attention: bool = True) -> Tensor:
        """Token-averaged teacher-forced negative log-likelihood of targets.

        Encodes the sources, then scores each reference token (plus EOS)
        under the decoder conditioned on ``out_lang``.
        """
        h_enc, pooled, enc_mask = self.encode_batch(src_sentences)
        return self.nll_given_context(
            pooled, h_enc if attention else None, enc_mask if attention else None,
            tgt_sentences, out_lang,
        )

    def nll_given_context(self, init: Tensor, h_enc: Tensor | None,
                          enc_mask: np.ndarray | None, tgt_sentences, out_lang: int) -> Tensor:
        tgt_ids, tgt_len, _ = pad_batch(tgt_sentences)
        b, t_out = tgt_ids.shape
        t_out += 1  # room for EOS
        inputs = np.full((b, t_out), PAD, dtype=np.int64)
        targets = np.full((b, t_out), PAD, dtype=np.int64)
        inputs[:, 0] = BOS
        inputs[:, 1:] = tgt_ids
        targets[:, :-1] = tgt_ids
        targets[np.arange(b), tgt_len] = EOS
        loss_mask = np.arange(t_out)[None, :] <= tgt_len[:, None]

        hiddens = [init for _ in self.dec_layers]
        logits = []
        for t in range(t_out):
            logits.append(self._decoder_step(inputs[:, t], t, hiddens, out_lang, h_enc, enc_mask))
        logp = T.log_softmax(T.stack(logits, axis=1))
        tok_logp = T.gather(logp, targets[:, :, None])
        picked = T.reshape(tok_logp, (b, t_out)) * Tensor(loss_mask.astype(np.float64))
        return -(T.tsum(picked) * (1.0 / float(loss_mask.sum())))

    def decode_greedy_batch(self, init: Tensor, h_enc: Tensor | None,
                            enc_mask: np.ndarray | None, lang: int,
                            max_len: int | None = None) -> tuple[list[np.ndarray], np.ndarray]:
        """Greedy argmax decoding; deterministic and never differentiable.

        PAD and BOS are never emitted, and EOS is rejected on the first
        step so every output has at least one token. Returns the decoded
        sentences and a per-sentence flag marking max-length truncation.
        """
        if max_len is None:
            max_len = self.config.max_len
        b = init.data.shape[0]
        with T.no_grad():
            hiddens = [init.detach() for _ in self.dec_layers]
            h_enc = None if h_enc is None else h_enc.detach()
            tok = np.full(b, BOS, dtype=np.int64)
            done = np.zeros(b, dtype=bool)
            steps = []
            for t in range(max_len):
                logits = self._decoder_step(tok, t, hiddens, lang, h_enc, enc_mask).data.copy()
                logits[:, PAD] = -np.inf
                logits[:, BOS] = -np.inf
                if t == 0:
                    logits[:, EOS] = -np.inf
                tok = logits.argmax(axis=1)
                tok[done] = PAD
                done |= tok == EOS
                steps.append(tok.copy())
                if done.all():
                    break
        grid = np.stack(steps, axis=1)
        sentences = []
        for row in grid:
            ids = row[(row != PAD) & (row != EOS)]
            sentences.append(ids.astype(np.int64))
        return sentences, ~done

    def translate_batch(self, sentences, out_lang: int,
                        max_len: int | None = None) -> tuple[list[np.ndarray], np.ndarray]:
        """Greedy translation with attention over the input states."""
        with T.no_grad():
            h_enc, pooled, mask = self.encode_batch(sentences)
        return self.decode_greedy_batch(pooled, h_enc, mask, out_lang, max_len=max_len)

    def decode_from_vector(self, vectors: Tensor, lang: int,
                           max_len: int | None = None) -> tuple[list[np.ndarray], np.ndarray]:
        """Greedy decoding conditioned on a single vector per row (no attention);
        the vector seeds the initial hidden state of every decoder layer."""
        return self.decode_greedy_batch(vectors, None, None, lang, max_len=max_len)

    def translation_nll(self, sentence: np.ndarray, reference: np.ndarray,
                        out_lang: int) -> Tensor:
        """Teacher-forced NLL of one (sentence, reference) pair."""
        if len(reference) == 0:
            raise DegenerateInputError("reference must be non-empty")
        return self.nll_batch([sentence], [reference], out_lang)
