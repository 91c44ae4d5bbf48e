"""Corpus BLEU, token accuracy, and the Hits@k retrieval protocol."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .engine import EvaluationNetwork
from .model import TranslationModel
from .tensor import Tensor

__all__ = ["BleuReport", "HitsReport", "corpus_bleu", "token_accuracy", "hits_at_k"]


@dataclass
class BleuReport:
    """Corpus-level BLEU on the 0-100 scale with its ingredients.

    bleu = brevity_penalty * exp(mean of log precisions) * 100; zero when
    any n-gram precision is zero and smoothing is off.
    """

    bleu: float
    precisions: list[float]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    smoothed: bool

    def rows(self) -> list[dict]:
        return [{
            "bleu": self.bleu,
            **{f"p{i + 1}": p for i, p in enumerate(self.precisions)},
            "brevity_penalty": self.brevity_penalty,
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
            "smoothed": int(self.smoothed),
        }]


def _ngrams(ids, n: int) -> Counter:
    seq = tuple(int(t) for t in ids)
    return Counter(seq[i : i + n] for i in range(len(seq) - n + 1))


def corpus_bleu(candidates, references, max_n: int = 4,
                smoothing: bool = True, epsilon: float = 0.01) -> BleuReport:
    """Corpus BLEU with clipped n-gram counts and brevity penalty.

    Counts are pooled over the corpus before taking precisions. With
    ``smoothing`` on, zero clipped-match totals are replaced by
    ``epsilon`` (short desk-scale sentences rarely share 4-grams);
    with it off, any zero precision makes the score exactly 0.
    """
    if len(candidates) != len(references):
        raise ValueError(
            f"candidate/reference length mismatch: {len(candidates)} vs {len(references)}"
        )
    if not references:
        raise ValueError("empty corpus")
    matches = [0] * max_n
    totals = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            cn = _ngrams(cand, n)
            rn = _ngrams(ref, n)
            totals[n - 1] += sum(cn.values())
            matches[n - 1] += sum(min(c, rn[g]) for g, c in cn.items())

    precisions = []
    for m, t in zip(matches, totals):
        if t == 0:
            precisions.append(0.0)
        elif m == 0 and smoothing:
            precisions.append(epsilon / t)
        else:
            precisions.append(m / t)

    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(
        bleu=score,
        precisions=precisions,
        brevity_penalty=bp,
        candidate_length=cand_len,
        reference_length=ref_len,
        smoothed=smoothing,
    )


def token_accuracy(candidates, references) -> float:
    """Mean over pairs of (matching positions / min pair length)."""
    if len(candidates) != len(references):
        raise ValueError(
            f"candidate/reference length mismatch: {len(candidates)} vs {len(references)}"
        )
    if not references:
        raise ValueError("empty corpus")
    accs = []
    for cand, ref in zip(candidates, references):
        n = min(len(cand), len(ref))
        if n == 0:
            accs.append(0.0)
            continue
        eq = sum(int(a) == int(b) for a, b in zip(cand[:n], ref[:n]))
        accs.append(eq / n)
    return float(np.mean(accs))


@dataclass
class HitsReport:
    """Hit rates per rank cutoff for one noise ratio."""

    noise_ratio: float
    n_queries: int
    n_candidates: int
    hits: dict[int, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"noise_ratio": self.noise_ratio, "k": k, "hits": rate,
             "queries": self.n_queries, "candidates": self.n_candidates}
            for k, rate in sorted(self.hits.items())
        ]


def hits_at_k(gold_pairs, distractor_pool, noise_ratio: float,
              model: TranslationModel, evaluator: EvaluationNetwork,
              ks=(1, 3, 5, 8, 10, 15, 20)) -> HitsReport:
    """Rank gold targets among distractor-diluted candidates.

    The candidate set holds every gold target plus enough distractors for
    them to make up ``noise_ratio`` of the set. Each gold source queries
    the whole set, ranked by joint-space cosine similarity, and a query
    hits at k when its own gold target ranks within the top k. Ties break
    toward the lower pool index.
    """
    if not 0.0 <= noise_ratio < 1.0:
        raise ValueError(f"noise_ratio must be in [0, 1), got {noise_ratio}")
    if not gold_pairs:
        raise ValueError("gold pair set is empty")
    n_gold = len(gold_pairs)
    n_distract = int(round(n_gold * noise_ratio / (1.0 - noise_ratio)))
    if n_distract > len(distractor_pool):
        raise ValueError(
            f"need {n_distract} distractors for noise ratio {noise_ratio}, "
            f"pool has {len(distractor_pool)}"
        )
    candidates = [t for _, t in gold_pairs] + list(distractor_pool[:n_distract])

    def embed(sentences) -> np.ndarray:
        out = np.empty((len(sentences), model.config.hidden_size))
        with T.no_grad():
            for start in range(0, len(sentences), 256):
                chunk = sentences[start : start + 256]
                _, pooled, _ = model.encode_batch(chunk)
                out[start : start + len(chunk)] = pooled.data
        return out

    with T.no_grad():
        r_query = evaluator.forward(Tensor(embed([s for s, _ in gold_pairs]))).data
        r_cand = evaluator.forward(Tensor(embed(candidates))).data
    r_query /= np.linalg.norm(r_query, axis=1, keepdims=True)
    r_cand /= np.linalg.norm(r_cand, axis=1, keepdims=True)
    sims = r_query @ r_cand.T  # (Q, C) cosine in the joint space

    # rank of each query's own gold target (stable ties by pool index)
    gold_rank = np.empty(n_gold, dtype=np.int64)
    for q in range(n_gold):
        own = sims[q, q]
        better = np.count_nonzero(sims[q] > own)
        tied_before = np.count_nonzero(sims[q, :q] == own)
        gold_rank[q] = better + tied_before

    report = HitsReport(noise_ratio=noise_ratio, n_queries=n_gold,
                        n_candidates=len(candidates))
    for k in ks:
        report.hits[int(k)] = float(np.mean(gold_rank < k))
    return report
