"""Flat key=value configuration shared by every command.

One text file, one namespace: corpus-generation keys feed CipherSpec,
training keys feed TrainConfig, and the rest steer individual commands.
Command lines may override any key with ``--key=value``.
"""

from __future__ import annotations

from pathlib import Path

from .cipher import CipherSpec
from .training import TrainConfig

__all__ = ["ConfigError", "CONFIG_KEYS", "default_config", "load_config",
           "apply_overrides", "parse_value", "cipher_spec_from",
           "train_config_from", "format_config"]


class ConfigError(ValueError):
    """Unknown key, bad value, or unreadable config file."""


def _opt_int(s: str):
    return None if s.lower() in ("none", "") else int(s)


# name -> (parser, default, description)
CONFIG_KEYS: dict[str, tuple] = {
    # cipher corpus generation
    "vocab_size": (int, 100, "content tokens in the shared inventory"),
    "data_seed": (int, 0, "RNG seed for corpus sampling"),
    "substitution_seed": (_opt_int, 1, "seed of the substitution permutation; 'none' = identity"),
    "window": (int, 1, "local reordering window of the cipher"),
    "reorder_rule": (str, "block-reverse", "deterministic reordering rule"),
    "n_train": (int, 2000, "training sentences per side"),
    "n_valid": (int, 200, "held-out monolingual sentences per side"),
    "n_test": (int, 500, "gold parallel test pairs"),
    "n_distractor": (int, 0, "extra cipher sentences for retrieval noise pools"),
    "len_min": (int, 3, "minimum sentence length"),
    "len_max": (int, 12, "maximum sentence length"),
    "zipf_exponent": (float, 1.1, "unigram frequency skew"),
    "bigram_weight": (float, 0.5, "probability of drawing a preferred successor"),
    "parallel_fraction": (float, 0.0, "fraction of true parallels injected into training"),
    # model and training
    "mode": (str, "extract-edit", "extract-edit | back-translation | mle-retrain"),
    "seed": (int, 0, "training seed (init, batching, noise)"),
    "hidden_size": (int, 64, "hidden and embedding width"),
    "layers": (int, 2, "recurrent layers in encoder and decoder"),
    "eval_hidden": (int, 64, "evaluation-network hidden width"),
    "eval_out": (int, 64, "evaluation-network output width"),
    "max_len": (int, 20, "sentence length cap, also the decode budget"),
    "batch_size": (int, 32, "sentences per direction per step"),
    "lr": (float, 3e-4, "Adam learning rate, encoder/decoder group"),
    "lr_evaluator": (float, 3e-4, "Adam learning rate, evaluation network"),
    "omega_lm": (float, 1.0, "language-modeling loss weight"),
    "omega_com": (float, 1.0, "comparative / reconstruction loss weight"),
    "lambda": (float, 0.5, "inverse temperature of the ranking softmax"),
    "k": (int, 10, "extracted sentences per source"),
    "episode_len": (int, 50, "steps between embedding-index rebuilds"),
    "pretrain_steps": (int, 2000, "language-modeling pretraining steps"),
    "main_steps": (int, 3000, "steps of the configured mode after pretraining"),
    "p_drop": (float, 0.1, "word-drop probability of the noise model"),
    "shuffle_window": (int, 3, "local shuffle window of the noise model"),
    "init_mode": (str, "oracle", "oracle = mix dictionary word translation into pretraining"),
    "valid_interval": (int, 200, "steps between model-selection scoring"),
    "checkpoint_interval": (int, 1000, "steps between checkpoints"),
    # command plumbing
    "extractions_path": (str, "", "extraction dump consumed by mle-retrain"),
    "sweep_ks": (str, "1,3,5,8,10", "k values for sweep-k"),
    "hits_noise_ratios": (str, "0,0.5,0.9", "distractor ratios for the hits report"),
    "hits_ks": (str, "1,3,5,8,10,15,20", "rank cutoffs for the hits report"),
}


def default_config() -> dict:
    return {k: v[1] for k, v in CONFIG_KEYS.items()}


def parse_value(key: str, raw: str):
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    parser = CONFIG_KEYS[key][0]
    try:
        return parser(raw.strip())
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad value for {key}: {raw!r}") from e


def load_config(path=None) -> dict:
    """Defaults, optionally overlaid with a key=value file."""
    cfg = default_config()
    if path is None:
        return cfg
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}: line {i} is not key = value")
        key, raw = stripped.split("=", 1)
        cfg[key.strip()] = parse_value(key.strip(), raw)
    return cfg


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` strings (from --key=value arguments)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        cfg[key] = parse_value(key, raw)
    return cfg


def format_config(cfg: dict) -> str:
    lines = [f"{k} = {'none' if cfg[k] is None else cfg[k]}" for k in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def cipher_spec_from(cfg: dict) -> CipherSpec:
    return CipherSpec(
        vocab_size=cfg["vocab_size"],
        seed=cfg["data_seed"],
        substitution_seed=cfg["substitution_seed"],
        window=cfg["window"],
        reorder_rule=cfg["reorder_rule"],
        n_train=cfg["n_train"],
        n_valid=cfg["n_valid"],
        n_test=cfg["n_test"],
        n_distractor=cfg["n_distractor"],
        len_min=cfg["len_min"],
        len_max=cfg["len_max"],
        zipf_exponent=cfg["zipf_exponent"],
        bigram_weight=cfg["bigram_weight"],
        parallel_fraction=cfg["parallel_fraction"],
    )


def train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(
        mode=cfg["mode"],
        seed=cfg["seed"],
        hidden_size=cfg["hidden_size"],
        layers=cfg["layers"],
        eval_hidden=cfg["eval_hidden"],
        eval_out=cfg["eval_out"],
        max_len=cfg["max_len"],
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        lr_evaluator=cfg["lr_evaluator"],
        omega_lm=cfg["omega_lm"],
        omega_com=cfg["omega_com"],
        lam=cfg["lambda"],
        k=cfg["k"],
        episode_len=cfg["episode_len"],
        pretrain_steps=cfg["pretrain_steps"],
        main_steps=cfg["main_steps"],
        p_drop=cfg["p_drop"],
        shuffle_window=cfg["shuffle_window"],
        init_mode=cfg["init_mode"],
        valid_interval=cfg["valid_interval"],
        checkpoint_interval=cfg["checkpoint_interval"],
    )
