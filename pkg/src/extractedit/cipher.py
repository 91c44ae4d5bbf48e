"""Synthetic cipher language pairs with known ground truth.

A "language pair" is built from one shared pseudo-word inventory: source
sentences come from a Zipfian unigram-plus-bigram sampler, and target
sentences are cipher images (bijective token substitution followed by
deterministic block reversal within a window) of a disjoint source sample,
so the two training corpora share no parallel lines. Because the cipher is
invertible, gold parallel test pairs and an oracle dictionary come for
free, which is what makes unsupervised translation verifiable at this
scale.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .text import Corpus, Vocabulary

__all__ = [
    "CipherSpecError",
    "CipherSpec",
    "CipherPair",
    "token_inventory",
    "build_permutation",
    "apply_cipher",
    "invert_cipher",
    "generate_cipher_pair",
    "write_cipher_pair",
    "read_gold_pairs",
]

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


class CipherSpecError(ValueError):
    """Invalid cipher-pair specification."""


@dataclass(frozen=True)
class CipherSpec:
    """Everything needed to regenerate a cipher language pair bit-exactly."""

    vocab_size: int = 100
    seed: int = 0
    substitution_seed: int | None = 1  # None -> identity substitution
    window: int = 1
    reorder_rule: str = "block-reverse"
    n_train: int = 2000
    n_valid: int = 200
    n_test: int = 500
    n_distractor: int = 0
    len_min: int = 3
    len_max: int = 12
    zipf_exponent: float = 1.1
    bigram_weight: float = 0.5
    parallel_fraction: float = 0.0

    def validate(self) -> None:
        if self.vocab_size < 10:
            raise CipherSpecError(f"vocab_size must be >= 10, got {self.vocab_size}")
        if self.n_train < 100:
            raise CipherSpecError(f"n_train must be >= 100, got {self.n_train}")
        if self.window < 0:
            raise CipherSpecError(f"window must be >= 0, got {self.window}")
        if self.reorder_rule != "block-reverse":
            raise CipherSpecError(f"unknown reorder_rule {self.reorder_rule!r}")
        if not 1 <= self.len_min <= self.len_max:
            raise CipherSpecError("need 1 <= len_min <= len_max")
        if not 0.0 <= self.parallel_fraction <= 1.0:
            raise CipherSpecError("parallel_fraction must be in [0, 1]")


def token_inventory(size: int) -> list[str]:
    """Deterministic pseudo-word inventory shared by both languages."""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    words = list(syllables)
    i = 0
    while len(words) < size:
        words.append(syllables[i // len(syllables)] + syllables[i % len(syllables)])
        i += 1
    return words[:size]


def build_permutation(spec: CipherSpec) -> np.ndarray:
    """Substitution over content token ids; identity when unseeded."""
    if spec.substitution_seed is None:
        return np.arange(spec.vocab_size, dtype=np.int64)
    rng = np.random.default_rng(spec.substitution_seed)
    return rng.permutation(spec.vocab_size).astype(np.int64)


def _block_reverse(ids: np.ndarray, window: int) -> np.ndarray:
    if window == 0 or len(ids) < 2:
        return ids.copy()
    out = ids.copy()
    block = window + 1
    for start in range(0, len(ids), block):
        out[start : start + block] = out[start : start + block][::-1]
    return out


def apply_cipher(ids: np.ndarray, perm: np.ndarray, window: int) -> np.ndarray:
    """Substitute tokens through ``perm`` then block-reverse within ``window``.

    Every token is displaced by at most ``window`` positions and the map
    is a bijection on sentences.
    """
    return _block_reverse(perm[ids], window)


def invert_cipher(ids: np.ndarray, perm: np.ndarray, window: int) -> np.ndarray:
    """Exact inverse of ``apply_cipher`` (block reversal is an involution)."""
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=np.int64)
    return inv[_block_reverse(ids, window)]


class _SentenceSampler:
    """Zipfian unigram sampler with per-token preferred successors."""

    def __init__(self, spec: CipherSpec, rng: np.random.Generator):
        ranks = np.arange(1, spec.vocab_size + 1, dtype=np.float64)
        weights = ranks ** (-spec.zipf_exponent)
        self.unigram = weights / weights.sum()
        self.successors = rng.integers(0, spec.vocab_size, size=(spec.vocab_size, 3))
        self.spec = spec

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        spec = self.spec
        n = int(rng.integers(spec.len_min, spec.len_max + 1))
        out = np.empty(n, dtype=np.int64)
        out[0] = rng.choice(spec.vocab_size, p=self.unigram)
        for i in range(1, n):
            if rng.random() < spec.bigram_weight:
                out[i] = self.successors[out[i - 1], rng.integers(3)]
            else:
                out[i] = rng.choice(spec.vocab_size, p=self.unigram)
        return out


@dataclass
class CipherPair:
    """Generated corpora plus the ground truth that makes them gradable."""

    spec: CipherSpec
    vocab: Vocabulary
    src_train: Corpus
    tgt_train: Corpus
    src_valid: Corpus
    tgt_valid: Corpus
    gold: list[tuple[np.ndarray, np.ndarray]]  # (source ids, cipher ids)
    distractors: list[np.ndarray]  # cipher images of sources outside the gold set
    dictionary: np.ndarray  # content-id permutation, the oracle dictionary


def generate_cipher_pair(spec: CipherSpec) -> CipherPair:
    """Sample a full cipher language pair from the spec, bit-reproducibly.

    Train/valid/test/distractor draws are disjoint samples from the same
    sentence distribution; the target side of each split is the cipher
    image of its own draw, never of the source side (except for an
    optional injected fraction of true parallels in the training split).
    Gold test sources are de-duplicated so each gold target is unique in
    ranking pools.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sampler = _SentenceSampler(spec, rng)
    perm = build_permutation(spec)
    inventory = token_inventory(spec.vocab_size)
    vocab = Vocabulary(inventory)

    def draw(n: int) -> list[np.ndarray]:
        return [sampler.sample(rng) for _ in range(n)]

    src_train = draw(spec.n_train)
    tgt_train_src = draw(spec.n_train)
    n_par = int(round(spec.parallel_fraction * spec.n_train))
    for i in range(n_par):
        tgt_train_src[i] = src_train[i].copy()
    tgt_train = [apply_cipher(s, perm, spec.window) for s in tgt_train_src]

    src_valid = draw(spec.n_valid)
    tgt_valid = [apply_cipher(s, perm, spec.window) for s in draw(spec.n_valid)]

    gold_src: list[np.ndarray] = []
    seen: set[tuple[int, ...]] = set()
    while len(gold_src) < spec.n_test:
        s = sampler.sample(rng)
        key = tuple(int(t) for t in s)
        if key in seen:
            continue
        seen.add(key)
        gold_src.append(s)
    gold = [(s, apply_cipher(s, perm, spec.window)) for s in gold_src]

    distractors = [apply_cipher(s, perm, spec.window) for s in draw(spec.n_distractor)]

    # content-token ids in the joint vocabulary start after the reserved block
    offset = vocab.size - spec.vocab_size

    def as_corpus(sents, lang, tag):
        return Corpus([s + offset for s in sents], lang=lang, provenance=f"generated:{spec.seed}:{tag}")
    return CipherPair(
        spec=spec,
        vocab=vocab,
        src_train=as_corpus(src_train, "src", "src_train"),
        tgt_train=as_corpus(tgt_train, "tgt", "tgt_train"),
        src_valid=as_corpus(src_valid, "src", "src_valid"),
        tgt_valid=as_corpus(tgt_valid, "tgt", "tgt_valid"),
        gold=[(s + offset, t + offset) for s, t in gold],
        distractors=[d + offset for d in distractors],
        dictionary=perm,
    )


def write_cipher_pair(pair: CipherPair, outdir) -> dict:
    """Write corpora, gold pairs, oracle dictionary, and a sidecar manifest.

    Returns the manifest dict. File formats: corpora are one sentence per
    line with space-separated tokens; the gold test set and the dictionary
    are tab-separated source/target per line.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    vocab = pair.vocab

    def write_corpus(name: str, corpus: Corpus) -> str:
        p = outdir / name
        with open(p, "w", encoding="utf-8") as f:
            for ids in corpus:
                f.write(" ".join(vocab.decode(ids)) + "\n")
        return name

    files = {
        "src_train": write_corpus("src.train.txt", pair.src_train),
        "tgt_train": write_corpus("tgt.train.txt", pair.tgt_train),
        "src_valid": write_corpus("src.valid.txt", pair.src_valid),
        "tgt_valid": write_corpus("tgt.valid.txt", pair.tgt_valid),
    }
    with open(outdir / "gold.test.tsv", "w", encoding="utf-8") as f:
        for s, t in pair.gold:
            f.write(" ".join(vocab.decode(s)) + "\t" + " ".join(vocab.decode(t)) + "\n")
    files["gold_test"] = "gold.test.tsv"
    if pair.distractors:
        with open(outdir / "distractors.txt", "w", encoding="utf-8") as f:
            for d in pair.distractors:
                f.write(" ".join(vocab.decode(d)) + "\n")
        files["distractors"] = "distractors.txt"
    inventory = token_inventory(pair.spec.vocab_size)
    with open(outdir / "oracle_dict.tsv", "w", encoding="utf-8") as f:
        for i, j in enumerate(pair.dictionary):
            f.write(f"{inventory[i]}\t{inventory[int(j)]}\n")
    files["oracle_dict"] = "oracle_dict.tsv"

    manifest = {"spec": asdict(pair.spec), "files": files}
    with open(outdir / "corpus_manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def full_vocab_dictionary(pair: CipherPair) -> np.ndarray:
    """Oracle dictionary lifted to full joint-vocabulary ids.

    Reserved ids map to themselves; content id i maps to its substitution
    image. Suitable for position-wise word translation of id arrays.
    """
    offset = pair.vocab.size - pair.spec.vocab_size
    table = np.arange(pair.vocab.size, dtype=np.int64)
    table[offset:] = pair.dictionary + offset
    return table


def read_gold_pairs(path, vocab: Vocabulary) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read a tab-separated gold test set back into id pairs."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise CipherSpecError(f"{path}: line {i} is not source<TAB>target")
            src, tgt = parts
            pairs.append((vocab.encode(src.split()), vocab.encode(tgt.split())))
    return pairs
