"""Extraction, editing, and candidate scoring.

Extraction is an exact brute-force nearest-neighbor scan over a snapshot
matrix of target-corpus sentence embeddings (the index is rebuilt once per
training episode, never per batch). Editing max-pools the source embedding
with an extracted sentence's embedding and greedily decodes the pooled
vector; the decoded sentence is re-encoded so all ranking candidates live
in the same representation space. Scoring projects embeddings through a
shared MLP into a joint space, measures cosine similarity to the source
there, and turns the similarities into a ranking distribution with a
scaled softmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .model import TranslationModel
from .tensor import DegenerateInputError, Tensor
from .text import Corpus, Vocabulary

__all__ = [
    "EvaluationNetwork",
    "EmbeddingIndex",
    "ExtractionResult",
    "build_index",
    "extract_topk",
    "extract_topk_batch",
    "edit",
    "edit_batch",
    "score_candidates",
    "score_candidates_batch",
    "write_extraction_dump",
    "read_extraction_dump",
]


class EvaluationNetwork:
    """Shared MLP projecting sentence embeddings into the joint ranking space."""

    def __init__(self, d_in: int, rng: np.random.Generator,
                 hidden: int = 64, d_out: int = 64):
        def glorot(shape):
            limit = np.sqrt(6.0 / sum(shape))
            return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)

        self.w1 = glorot((d_in, hidden))
        self.b1 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w2 = glorot((hidden, hidden))
        self.b2 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w3 = glorot((hidden, d_out))
        self.b3 = Tensor(np.zeros(d_out), requires_grad=True)
        self.d_in = d_in
        self.d_out = d_out

    def forward(self, e: Tensor) -> Tensor:
        """Map (..., d_in) embeddings to (..., d_out) joint-space vectors."""
        lead = e.data.shape[:-1]
        x = T.reshape(e, (-1, self.d_in)) if len(lead) != 1 else e
        h = T.tanh(T.matmul(x, self.w1) + self.b1)
        h = T.tanh(T.matmul(h, self.w2) + self.b2)
        out = T.matmul(h, self.w3) + self.b3
        if len(lead) != 1:
            out = T.reshape(out, (*lead, self.d_out))
        return out

    def named_parameters(self) -> dict[str, Tensor]:
        return {
            "evaluator.w1": self.w1, "evaluator.b1": self.b1,
            "evaluator.w2": self.w2, "evaluator.b2": self.b2,
            "evaluator.w3": self.w3, "evaluator.b3": self.b3,
        }


@dataclass
class EmbeddingIndex:
    """Snapshot of corpus sentence embeddings; row i = encode(corpus[i])."""

    rows: np.ndarray  # (N, d), gradient-free by construction
    episode: int
    lang: str

    def __len__(self) -> int:
        return len(self.rows)

    def is_stale(self, current_episode: int) -> bool:
        return self.episode != current_episode


@dataclass
class ExtractionResult:
    """Top-k extraction for one source sentence plus its edited versions."""

    source_index: int
    indices: np.ndarray  # (k,) corpus indices, ascending distance
    distances: np.ndarray  # (k,) L2 distances
    edited: list[np.ndarray]  # k edited sentences (token ids)


def build_index(corpus: Corpus, model: TranslationModel,
                episode: int) -> EmbeddingIndex:
    """Encode every corpus sentence forward-only under current parameters.

    Sentences are encoded one at a time so each row is bit-identical to a
    standalone encode() call (batched GEMM rounds differently per shape).
    """
    if len(corpus) == 0:
        raise DegenerateInputError("cannot index an empty corpus")
    rows = np.empty((len(corpus), model.config.hidden_size))
    with T.no_grad():
        for i, sentence in enumerate(corpus):
            _, pooled, _ = model.encode_batch([sentence])
            rows[i] = pooled.data[0]
    return EmbeddingIndex(rows=rows, episode=episode, lang=corpus.lang)


def extract_topk_batch(queries: np.ndarray, index: EmbeddingIndex,
                       k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest index rows per query by L2 distance.

    Returns (indices (B,k), distances (B,k)) in ascending distance order;
    exact ties resolve to the lower corpus index (stable sort).
    """
    if k < 1 or k > len(index):
        raise ValueError(f"k must be in [1, {len(index)}], got {k}")
    queries = np.atleast_2d(queries)
    out_idx = np.empty((len(queries), k), dtype=np.int64)
    out_dist = np.empty((len(queries), k))
    for i, q in enumerate(queries):
        dist = np.sqrt(((index.rows - q) ** 2).sum(axis=1))
        order = np.argsort(dist, kind="stable")[:k]
        out_idx[i] = order
        out_dist[i] = dist[order]
    return out_idx, out_dist


def extract_topk(query: np.ndarray, index: EmbeddingIndex,
                 k: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-query top-k extraction; see extract_topk_batch."""
    idx, dist = extract_topk_batch(query[None, :], index, k)
    return idx[0], dist[0]


def edit_batch(e_src: np.ndarray, extracted: list[np.ndarray],
               model: TranslationModel, out_lang: int,
               max_len: int | None = None) -> list[np.ndarray]:
    """Edit extracted sentences toward the source embeddings, row-aligned.

    Pools each (source embedding, extracted embedding) pair element-wise
    by max and greedily decodes the pooled vectors. Decoding is forward
    only; callers re-encode the results when gradients are needed.
    """
    with T.no_grad():
        _, e_t, _ = model.encode_batch(extracted)
        pooled = np.maximum(e_src, e_t.data)
        edited, _ = model.decode_from_vector(Tensor(pooled), out_lang, max_len=max_len)
    return edited


def edit(e_src: np.ndarray, sentence: np.ndarray, model: TranslationModel,
         out_lang: int, max_len: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Edit one sentence; returns (edited sentence, its re-encoded embedding)."""
    if len(sentence) == 0:
        raise DegenerateInputError("cannot edit an empty sentence")
    edited = edit_batch(e_src[None, :], [sentence], model, out_lang, max_len=max_len)[0]
    with T.no_grad():
        _, e_edited = model.encode(edited)
    return edited, e_edited.data


def score_candidates_batch(e_src: Tensor, candidates: Tensor,
                           evaluator: EvaluationNetwork,
                           inv_temperature: float) -> Tensor:
    """Ranking distribution over candidates for each source row.

    e_src (B, d), candidates (B, C, d). Projects everything through the
    evaluation network, takes cosine similarity in the joint space, and
    normalizes with a scaled softmax over the C candidates jointly.
    Differentiable with respect to the evaluator and the embeddings.
    """
    if candidates.data.shape[-2] < 1:
        raise DegenerateInputError("need at least one candidate")
    r_src = evaluator.forward(e_src)
    r_cand = evaluator.forward(candidates)
    b, d_out = r_src.data.shape
    alpha = T.cosine(T.reshape(r_src, (b, 1, d_out)), r_cand)
    return T.scaled_softmax(alpha, inv_temperature, axis=-1)


def score_candidates(e_src: Tensor, candidates: list[Tensor],
                     evaluator: EvaluationNetwork,
                     inv_temperature: float) -> Tensor:
    """Single-source ranking distribution over a candidate embedding list."""
    stacked = T.stack(candidates, axis=0)
    d = e_src.data.shape[-1]
    probs = score_candidates_batch(
        T.reshape(e_src, (1, d)),
        T.reshape(stacked, (1, len(candidates), d)),
        evaluator,
        inv_temperature,
    )
    return T.reshape(probs, (len(candidates),))


# ---------------------------------------------------------------------------
# extraction dumps (CLI-facing inspection format, also feeds MLE retraining)


def write_extraction_dump(path, results: list[ExtractionResult],
                          vocab: Vocabulary) -> None:
    """One tab-separated record per source sentence:
    source index, space-joined target indices, space-joined distances,
    then the k edited sentences."""
    with open(path, "w", encoding="utf-8") as f:
        for r in results:
            fields = [
                str(r.source_index),
                " ".join(str(int(i)) for i in r.indices),
                " ".join(f"{d:.17g}" for d in r.distances),
            ]
            fields.extend(" ".join(vocab.decode(e)) for e in r.edited)
            f.write("\t".join(fields) + "\n")


def read_extraction_dump(path, vocab: Vocabulary) -> list[ExtractionResult]:
    results = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            src_idx = int(parts[0])
            indices = np.array([int(x) for x in parts[1].split()], dtype=np.int64)
            distances = np.array([float(x) for x in parts[2].split()])
            edited = [vocab.encode(p.split()) for p in parts[3:]]
            results.append(ExtractionResult(src_idx, indices, distances, edited))
    return results
