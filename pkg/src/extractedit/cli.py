"""Command-line entry point.

Subcommands: gen-corpus, train, translate, extract, evaluate, sweep-k.
Every command takes ``--config FILE`` plus ``--key=value`` overrides for
any config key, writes its artifacts under a run directory
(``--out``, or ``$EXTRACTEDIT_RUNS/<default name>``), and records a
manifest; the exit code is 0 exactly when the manifest records success.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_json, load_tensors, save_json
from .cipher import (
    full_vocab_dictionary,
    generate_cipher_pair,
    read_gold_pairs,
    token_inventory,
    write_cipher_pair,
)
from .config import (
    ConfigError,
    apply_overrides,
    cipher_spec_from,
    format_config,
    load_config,
    train_config_from,
)
from .engine import read_extraction_dump, write_extraction_dump
from .metrics import corpus_bleu, hits_at_k, token_accuracy
from .model import SRC, TGT
from .text import Corpus, Vocabulary, load_corpus
from .training import Trainer

ENV_OUT_ROOT = "EXTRACTEDIT_RUNS"


class CliError(RuntimeError):
    pass


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    try:
        from importlib.metadata import version

        return "v" + version("extractedit")
    except Exception:
        return "unknown"


def _resolve_out(out: str | None, default_name: str) -> Path:
    if out:
        return Path(out)
    root = os.environ.get(ENV_OUT_ROOT)
    if root:
        return Path(root) / default_name
    raise CliError(f"--out is required (or set ${ENV_OUT_ROOT})")


def _prepare_dir(path: Path, overwrite: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not overwrite:
            raise CliError(f"output directory {path} is not empty (use --overwrite)")
    path.mkdir(parents=True, exist_ok=True)


class RunManifest:
    """Collects what a command produced; written as manifest.json."""

    def __init__(self, out_dir: Path, command: str, cfg: dict):
        self.out_dir = out_dir
        self.data = {
            "command": command,
            "config": {k: (None if v is None else v) for k, v in cfg.items()},
            "seed": cfg.get("seed"),
            "build": _build_id(),
            "started": _now(),
            "finished": None,
            "success": False,
            "outputs": [],
            "checkpoints": [],
        }

    def add_output(self, path: Path) -> None:
        self.data["outputs"].append(str(path.relative_to(self.out_dir)))

    def finish(self, success: bool) -> None:
        self.data["finished"] = _now()
        self.data["success"] = success
        save_json(self.out_dir / "manifest.json", self.data)


# ---------------------------------------------------------------------------
# corpus loading shared by train/extract/evaluate


def _load_data(data_dir: Path, max_len: int):
    """Load a generated corpus directory (vocab, corpora, dictionary, spec)."""
    manifest_path = data_dir / "corpus_manifest.json"
    if manifest_path.exists():
        meta = load_json(manifest_path)
        vocab = Vocabulary(token_inventory(meta["spec"]["vocab_size"]))
        dictionary = None
        dict_path = data_dir / meta["files"].get("oracle_dict", "oracle_dict.tsv")
        if dict_path.exists():
            inv_index = {t: i for i, t in enumerate(token_inventory(meta["spec"]["vocab_size"]))}
            table = np.arange(vocab.size, dtype=np.int64)
            offset = vocab.size - meta["spec"]["vocab_size"]
            with open(dict_path, encoding="utf-8") as f:
                for line in f:
                    a, b = line.split()
                    table[offset + inv_index[a]] = offset + inv_index[b]
            dictionary = table
    else:
        meta = None
        vocab = None
        dictionary = None

    def load(name: str, lang: str) -> Corpus:
        corpus, _ = load_corpus(data_dir / name, vocab=vocab, max_len=max_len, lang=lang)
        return corpus

    if vocab is None:
        # arbitrary corpora: build one joint frequency vocabulary
        lines = []
        for name in ("src.train.txt", "tgt.train.txt"):
            lines.extend((data_dir / name).read_text(encoding="utf-8").splitlines())
        vocab = Vocabulary.from_lines(lines)

    corpora = {
        "src_train": load("src.train.txt", "src"),
        "tgt_train": load("tgt.train.txt", "tgt"),
    }
    for name, key in (("src.valid.txt", "src_valid"), ("tgt.valid.txt", "tgt_valid")):
        if (data_dir / name).exists():
            corpora[key] = load(name, name.split(".")[0])
    return vocab, corpora, dictionary, meta


def _make_trainer(cfg: dict, data_dir: Path) -> Trainer:
    tc = train_config_from(cfg)
    vocab, corpora, dictionary, _ = _load_data(data_dir, tc.max_len)
    if tc.init_mode == "oracle" and dictionary is None:
        raise CliError("init_mode=oracle needs an oracle dictionary in the data directory "
                       "(use init_mode=random for plain corpora)")
    return Trainer(tc, vocab, corpora["src_train"], corpora["tgt_train"],
                   corpora.get("src_valid"), corpora.get("tgt_valid"),
                   oracle_dictionary=dictionary)


def _load_checkpoint_bundle(ckpt_dir: Path):
    """Reconstruct model/evaluator/vocab straight from a checkpoint."""
    from .engine import EvaluationNetwork
    from .model import ModelConfig, TranslationModel

    meta = load_json(ckpt_dir / "state.json")
    cfg = meta["config"]
    vocab = Vocabulary(meta["vocab_content"])
    rng = np.random.default_rng(cfg["seed"])
    model = TranslationModel(
        ModelConfig(vocab_size=vocab.size, hidden_size=cfg["hidden_size"],
                    layers=cfg["layers"], max_len=cfg["max_len"]),
        rng,
    )
    evaluator = EvaluationNetwork(cfg["hidden_size"], rng,
                                  hidden=cfg["eval_hidden"], d_out=cfg["eval_out"])
    params = load_tensors(ckpt_dir / "params.bin")
    for k, p in {**model.named_parameters(), **evaluator.named_parameters()}.items():
        p.data = params[k].copy()
    return model, evaluator, vocab, cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args, cfg: dict) -> int:
    out = _resolve_out(args.out, f"corpus-seed{cfg['data_seed']}")
    _prepare_dir(out, args.overwrite)
    manifest = RunManifest(out, "gen-corpus", cfg)
    try:
        spec = cipher_spec_from(cfg)
        pair = generate_cipher_pair(spec)
        files = write_cipher_pair(pair, out)["files"]
        for name in files.values():
            manifest.add_output(out / name)
        manifest.add_output(out / "corpus_manifest.json")
        manifest.finish(True)
        print(f"wrote cipher pair ({spec.n_train}/side) to {out}")
        return 0
    except Exception as e:
        manifest.finish(False)
        print(f"gen-corpus failed: {e}", file=sys.stderr)
        return 1


def _checkpoint_table(trainer: Trainer, ckpt_root: Path) -> list[dict]:
    d_by_step: dict[str, tuple[str, str]] = {}
    for row in trainer.state.metric_rows:
        if row[6]:
            d_by_step[row[0]] = (row[6], row[7])
    table = []
    if ckpt_root.exists():
        for sub in sorted(ckpt_root.iterdir()):
            step = str(int(sub.name.split("_")[1]))
            ds = d_by_step.get(step, ("", ""))
            entry = {"path": str(sub.relative_to(ckpt_root.parent)), "step": int(step),
                     "d_s2t": float(ds[0]) if ds[0] else None,
                     "d_t2s": float(ds[1]) if ds[1] else None}
            entry["d_mean"] = (None if entry["d_s2t"] is None
                               else 0.5 * (entry["d_s2t"] + entry["d_t2s"]))
            table.append(entry)
    return table


def cmd_train(args, cfg: dict) -> int:
    out = _resolve_out(args.out, f"{cfg['mode']}-seed{cfg['seed']}")
    _prepare_dir(out, args.overwrite)
    manifest = RunManifest(out, "train", cfg)
    try:
        data_dir = Path(args.data)
        trainer = _make_trainer(cfg, data_dir)
        (out / "config.txt").write_text(format_config(cfg), encoding="utf-8")
        manifest.add_output(out / "config.txt")

        mle_pairs = None
        if cfg["mode"] == "mle-retrain":
            if not cfg["extractions_path"]:
                raise CliError("mle-retrain needs extractions_path in the config")
            dump = read_extraction_dump(cfg["extractions_path"], trainer.vocab)
            mle_pairs = trainer.extraction_pairs(dump)

        if args.resume:
            trainer.restore(Path(args.resume))
        ckpt_root = out / "checkpoints"
        trainer.run(checkpoint_dir=ckpt_root, mle_pairs=mle_pairs,
                    log=lambda step, row: print(f"step {step}: total={row[2]}"))

        (out / "metrics.csv").write_text(trainer.metrics_csv(), encoding="utf-8")
        manifest.add_output(out / "metrics.csv")
        table = _checkpoint_table(trainer, ckpt_root)
        for entry in table:
            manifest.add_output(ckpt_root / Path(entry["path"]).name / "state.json")
        manifest.data["checkpoints"] = table
        scored = [e for e in table if e["d_mean"] is not None]
        best = (max(scored, key=lambda e: e["d_mean"]) if scored
                else (table[-1] if table else None))
        manifest.data["best_checkpoint"] = best
        manifest.finish(True)
        print(f"run complete; best checkpoint: {best['path'] if best else 'none'}")
        return 0
    except Exception as e:
        manifest.finish(False)
        print(f"train failed: {e}", file=sys.stderr)
        return 1


def cmd_translate(args, cfg: dict) -> int:
    try:
        model, _, vocab, _ = _load_checkpoint_bundle(Path(args.checkpoint))
        out_lang = TGT if args.direction == "s2t" else SRC
        in_path = Path(args.input)
        text = in_path.read_text(encoding="utf-8")
        lines = text.splitlines()
        out_lines = []
        if lines:
            for i, line in enumerate(lines, start=1):
                for tok in line.split():
                    if tok not in vocab.token_to_id:
                        raise CliError(
                            f"{in_path}: line {i}: token {tok!r} is not in the "
                            f"checkpoint vocabulary")
            sentences = [vocab.encode(line.split()[: model.config.max_len])
                         for line in lines]
            for start in range(0, len(sentences), 64):
                decoded, _ = model.translate_batch(sentences[start : start + 64], out_lang)
                out_lines.extend(" ".join(vocab.decode(ids)) for ids in decoded)
        Path(args.output).write_text(
            "".join(line + "\n" for line in out_lines), encoding="utf-8")
        print(f"translated {len(out_lines)} sentences -> {args.output}")
        return 0
    except Exception as e:
        print(f"translate failed: {e}", file=sys.stderr)
        return 1


def cmd_extract(args, cfg: dict) -> int:
    try:
        ckpt = Path(args.checkpoint)
        meta = load_json(ckpt / "state.json")
        cfg = dict(cfg)
        cfg.update({k: meta["config"][k] for k in meta["config"]})
        trainer = _make_trainer(cfg, Path(args.data))
        trainer.restore(ckpt)
        results = trainer.extract_corpus(limit=args.limit)
        write_extraction_dump(args.out_file, results, trainer.vocab)
        print(f"wrote {len(results)} extraction records to {args.out_file}")
        return 0
    except Exception as e:
        print(f"extract failed: {e}", file=sys.stderr)
        return 1


def cmd_evaluate(args, cfg: dict) -> int:
    out = _resolve_out(args.out, "evaluation")
    _prepare_dir(out, args.overwrite)
    manifest = RunManifest(out, "evaluate", cfg)
    try:
        reports = out / "reports"
        reports.mkdir(exist_ok=True)
        metrics = [m for m in args.metrics.split(",") if m] if args.metrics else []
        if metrics:
            model, evaluator, vocab, _ = _load_checkpoint_bundle(Path(args.checkpoint))
            data_dir = Path(args.data)
            gold = read_gold_pairs(data_dir / "gold.test.tsv", vocab)
            text_lines = []
            if "bleu" in metrics or "accuracy" in metrics:
                decoded = []
                srcs = [s for s, _ in gold]
                refs = [t for _, t in gold]
                for start in range(0, len(srcs), 64):
                    d, _ = model.translate_batch(srcs[start : start + 64], TGT)
                    decoded.extend(d)
                if "bleu" in metrics:
                    rep = corpus_bleu(decoded, refs)
                    _write_csv(reports / "bleu.csv", rep.rows())
                    manifest.add_output(reports / "bleu.csv")
                    text_lines.append(
                        f"BLEU {rep.bleu:.2f} (p={['%.3f' % p for p in rep.precisions]}, "
                        f"BP={rep.brevity_penalty:.3f})")
                if "accuracy" in metrics:
                    acc = token_accuracy(decoded, refs)
                    _write_csv(reports / "accuracy.csv", [{"token_accuracy": acc}])
                    manifest.add_output(reports / "accuracy.csv")
                    text_lines.append(f"token accuracy {acc:.4f}")
            if "hits" in metrics:
                pool = []
                if (data_dir / "distractors.txt").exists():
                    pool_corpus, _ = load_corpus(data_dir / "distractors.txt", vocab=vocab,
                                                 max_len=model.config.max_len)
                    pool = pool_corpus.sentences
                ratios = [float(x) for x in cfg["hits_noise_ratios"].split(",")]
                ks = [int(x) for x in cfg["hits_ks"].split(",")]
                rows = []
                for ratio in ratios:
                    rep = hits_at_k(gold, pool, ratio, model, evaluator, ks=ks)
                    rows.extend(rep.rows())
                    text_lines.append(
                        "hits@k at {:.0%} noise: ".format(ratio)
                        + " ".join(f"{k}:{rep.hits[k]:.3f}" for k in ks))
                _write_csv(reports / "hits.csv", rows)
                manifest.add_output(reports / "hits.csv")
            (reports / "report.txt").write_text(
                "".join(line + "\n" for line in text_lines), encoding="utf-8")
            manifest.add_output(reports / "report.txt")
            for line in text_lines:
                print(line)
        manifest.finish(True)
        return 0
    except Exception as e:
        manifest.finish(False)
        print(f"evaluate failed: {e}", file=sys.stderr)
        return 1


def cmd_sweep_k(args, cfg: dict) -> int:
    out = _resolve_out(args.out, f"sweep-k-seed{cfg['seed']}")
    _prepare_dir(out, args.overwrite)
    manifest = RunManifest(out, "sweep-k", cfg)
    try:
        ks = sorted(int(x) for x in (args.ks or cfg["sweep_ks"]).split(","))
        data_dir = Path(args.data)

        # shared pretrained initialization: pretrain once, reuse per k
        pre_cfg = dict(cfg)
        pre_cfg["main_steps"] = 0
        pre_trainer = _make_trainer(pre_cfg, data_dir)
        pre_trainer.run()
        pre_dir = pre_trainer.save_checkpoint(out / "pretrained")

        vocab, _, _, _ = _load_data(data_dir, cfg["max_len"])
        gold = read_gold_pairs(data_dir / "gold.test.tsv", vocab)
        srcs = [s for s, _ in gold]
        refs = [t for _, t in gold]

        rows = []
        for k in ks:
            k_cfg = dict(cfg)
            k_cfg["k"] = k
            trainer = _make_trainer(k_cfg, data_dir)
            trainer.restore(pre_dir, require_same_config=False)
            trainer.run()
            decoded = []
            for start in range(0, len(srcs), 64):
                d, _ = trainer.model.translate_batch(srcs[start : start + 64], TGT)
                decoded.extend(d)
            acc = token_accuracy(decoded, refs)
            rows.append({"k": k, "seed": cfg["seed"], "token_accuracy": acc})
            (out / f"metrics_k{k}.csv").write_text(trainer.metrics_csv(), encoding="utf-8")
            manifest.add_output(out / f"metrics_k{k}.csv")
            print(f"k={k}: token accuracy {acc:.4f}")
        _write_csv(out / "sweep.csv", rows)
        manifest.add_output(out / "sweep.csv")
        manifest.finish(True)
        return 0
    except Exception as e:
        manifest.finish(False)
        print(f"sweep-k failed: {e}", file=sys.stderr)
        return 1


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # abbreviation matching is off so --key=value config overrides are never
    # mistaken for prefixes of real options (e.g. --k=3 vs --ks)
    parser = argparse.ArgumentParser(
        prog="extractedit",
        description="Desk-scale unsupervised translation experiments on cipher "
                    "language pairs.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_cmd(name, help_text):
        return sub.add_parser(name, help=help_text, allow_abbrev=False)

    def common(p, out=True):
        p.add_argument("--config", default=None, help="key=value config file")
        if out:
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--overwrite", action="store_true",
                           help="replace existing outputs")

    p = add_cmd("gen-corpus", "generate a cipher language pair")
    common(p)

    p = add_cmd("train", "pretrain then run the configured mode")
    common(p)
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--resume", default=None, help="checkpoint directory to resume")

    p = add_cmd("translate", "translate a file with a checkpoint")
    common(p, out=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--direction", choices=["s2t", "t2s"], default="s2t")

    p = add_cmd("extract", "dump top-k extractions with edits")
    common(p, out=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-file", required=True)
    p.add_argument("--limit", type=int, default=None)

    p = add_cmd("evaluate", "score a checkpoint on the gold test set")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metrics", default="bleu,accuracy",
                   help="comma list from: bleu,accuracy,hits (empty = manifest only)")

    p = add_cmd("sweep-k", "one run per k from a shared pretrained start")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ks", default=None, help="comma list of k values")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    overrides = []
    for item in extra:
        if item.startswith("--") and "=" in item:
            overrides.append(item[2:])
        else:
            parser.error(f"unrecognized argument: {item}")
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    handlers = {
        "gen-corpus": cmd_gen_corpus,
        "train": cmd_train,
        "translate": cmd_translate,
        "extract": cmd_extract,
        "evaluate": cmd_evaluate,
        "sweep-k": cmd_sweep_k,
    }
    try:
        return handlers[args.command](args, cfg)
    except CliError as e:
        print(f"{args.command} failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
