"""Unified command line: annotate, build-vocab, train, translate, eval, gradcheck.

Configuration precedence: built-in defaults < --profile preset < config
file < explicit flags. Every run writes a JSON manifest next to its
primary output recording the resolved configuration, seeds and input
digests.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import autodiff as ad
from .corpus import (
    FEATURE_VOCAB_SIZE,
    Vocab,
    build_vocab,
    encode_corpus,
    read_parallel,
)
from .errors import DataError, NumericError, RadnmtError, UsageError
from .evaluation import TOKENIZATIONS, evaluate
from .decoding import translate_file
from .model import ModelConfig, ModelParams, forward_loss, load_checkpoint
from .radicals import annotate_file, bundled_table_paths, load_radical_table
from .seeding import derive_rng
from .training import TrainConfig, train

# key -> (type, default); defaults follow the full-scale configuration
CONFIG_SCHEMA: dict[str, tuple[type, object]] = {
    "hidden": (int, 512),
    "char_embed": (int, 448),
    "feat_embed": (int, 64),
    "feat_vocab": (int, FEATURE_VOCAB_SIZE),
    "attention": (str, "general"),
    "dropout": (float, 0.8),
    "lr": (float, 1.0),
    "lr_decay": (float, 0.5),
    "decay_mode": (str, "plateau"),
    "clip": (float, 1.0),
    "batch": (int, 10),
    "epochs": (int, 30),
    "beam": (int, 5),
    "length_norm": (float, 0.0),
    "min_count": (int, 1),
    "max_size": (int, 0),  # 0 = unlimited
    "max_src_len": (int, 400),
    "eval_every": (int, 1),
    "seed": (int, 0),
}

PROFILES = {
    "paper": {},
    "toy": {"hidden": 64, "char_embed": 48, "feat_embed": 16, "epochs": 60, "dropout": 0.1},
}


def load_config(path) -> dict:
    """Parse a flat key=value file against the schema."""
    values: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_SCHEMA:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        kind = CONFIG_SCHEMA[key][0]
        try:
            values[key] = kind(value)
        except ValueError:
            raise UsageError(
                f"{path}:{lineno}: value {value!r} for {key!r} is not a valid {kind.__name__}"
            )
    return values


def resolve_config(file_values: dict | None, flag_values: dict, profile: str | None) -> dict:
    """defaults < profile < file < flags; unknown keys were rejected earlier."""
    merged = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    if profile is not None:
        if profile not in PROFILES:
            raise UsageError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        merged.update(PROFILES[profile])
    if file_values:
        merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def _resolve_seed(args, cfg: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("RADNMT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"RADNMT_SEED must be an integer, got {env!r}")
    return int(cfg.get("seed", 0))


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(target, command: str, config: dict, seed: int, inputs: dict) -> Path:
    """One manifest per run; identical manifests imply identical outputs."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seed": seed,
        "inputs": {name: _digest(p) for name, p in sorted(inputs.items())},
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    target.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return target


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1 here
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="radnmt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radnmt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    han_default, kana_default = bundled_table_paths()

    def add_tables(p):
        p.add_argument("--han-table", default=str(han_default), help="Han->radical TSV")
        p.add_argument("--kana-table", default=str(kana_default), help="kana->kanji TSV")

    p = sub.add_parser("annotate", help="emit char|radical pairs per input line")
    add_tables(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("build-vocab", help="build a character vocabulary file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-size", type=int, default=None)

    p = sub.add_parser("train", help="train a model")
    add_tables(p)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--train-src", required=True)
    p.add_argument("--train-tgt", required=True)
    p.add_argument("--dev-src", required=True)
    p.add_argument("--dev-tgt", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--char-embed", type=int, default=None, dest="char_embed")
    p.add_argument("--feat-embed", type=int, default=None, dest="feat_embed")
    p.add_argument("--no-features", action="store_true", help="train the no-feature baseline")

    p = sub.add_parser("translate", help="beam-translate a file")
    add_tables(p)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--length-norm", type=float, default=0.0)
    p.add_argument("--unk-token", default="〓")

    p = sub.add_parser("eval", help="perplexity + BLEU against references")
    add_tables(p)
    p.add_argument("--model", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--tokenization", choices=TOKENIZATIONS, default="char")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--smoothing", action="store_true")
    p.add_argument("--out", default=None, help="directory for metrics/examples files")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def _vocab_dir_paths(out_dir: Path):
    return out_dir / "src_vocab.tsv", out_dir / "tgt_vocab.tsv"


def _cmd_annotate(args) -> int:
    table = load_radical_table(args.han_table, args.kana_table)
    count = annotate_file(table, args.input, args.output)
    write_run_manifest(
        Path(args.output).with_suffix(Path(args.output).suffix + ".manifest.json"),
        "annotate",
        {},
        0,
        {"input": args.input, "han_table": args.han_table, "kana_table": args.kana_table},
    )
    print(f"annotated {count} lines -> {args.output}")
    return 0


def _cmd_build_vocab(args) -> int:
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    vocab = build_vocab(lines, min_count=args.min_count, max_size=args.max_size)
    vocab.save(args.output)
    write_run_manifest(
        Path(args.output).with_suffix(Path(args.output).suffix + ".manifest.json"),
        "build-vocab",
        {"min_count": args.min_count, "max_size": args.max_size or 0},
        0,
        {"input": args.input},
    )
    print(f"vocabulary of {len(vocab)} entries -> {args.output}")
    return 0


def _cmd_train(args) -> int:
    file_values = load_config(args.config) if args.config else None
    flags = {
        "epochs": args.epochs,
        "batch": args.batch,
        "dropout": args.dropout,
        "lr": args.lr,
        "hidden": args.hidden,
        "char_embed": args.char_embed,
        "feat_embed": args.feat_embed,
        "seed": args.seed,
    }
    cfg = resolve_config(file_values, flags, args.profile)
    seed = _resolve_seed(args, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    table = load_radical_table(args.han_table, args.kana_table)
    train_pairs = read_parallel(args.train_src, args.train_tgt)
    dev_pairs = read_parallel(args.dev_src, args.dev_tgt)
    src_vocab = build_vocab([s for s, _ in train_pairs], min_count=cfg["min_count"],
                            max_size=cfg["max_size"] or None)
    tgt_vocab = build_vocab([t for _, t in train_pairs], min_count=cfg["min_count"],
                            max_size=cfg["max_size"] or None)
    src_vocab_path, tgt_vocab_path = _vocab_dir_paths(out_dir)
    src_vocab.save(src_vocab_path)
    tgt_vocab.save(tgt_vocab_path)

    feat_dim = 0 if args.no_features else cfg["feat_embed"]
    mconfig = ModelConfig(
        src_vocab_size=len(src_vocab),
        tgt_vocab_size=len(tgt_vocab),
        char_embed_dim=cfg["char_embed"],
        feat_embed_dim=feat_dim,
        hidden_size=cfg["hidden"],
        feat_vocab_size=cfg["feat_vocab"],
        attention=cfg["attention"],
        dropout=cfg["dropout"],
    )
    params = ModelParams.initialize(mconfig, seed, feature_path=not args.no_features)
    tconfig = TrainConfig(
        lr=cfg["lr"],
        lr_decay=cfg["lr_decay"],
        decay_mode=cfg["decay_mode"],
        max_norm=cfg["clip"],
        batch_size=cfg["batch"],
        dropout=cfg["dropout"],
        epochs=cfg["epochs"],
        seed=seed,
        checkpoint_dir=str(out_dir / "checkpoints"),
        eval_every=cfg["eval_every"],
    )
    train_set = encode_corpus(train_pairs, src_vocab, tgt_vocab, table, cfg["max_src_len"])
    dev_set = encode_corpus(dev_pairs, src_vocab, tgt_vocab, table, max_chars=None)
    write_run_manifest(
        out_dir / "run_manifest.json", "train", cfg, seed,
        {
            "train_src": args.train_src, "train_tgt": args.train_tgt,
            "dev_src": args.dev_src, "dev_tgt": args.dev_tgt,
            "han_table": args.han_table, "kana_table": args.kana_table,
        },
    )
    report = train(params, train_set, dev_set, tconfig)
    (out_dir / "train_report.tsv").write_text(report.to_tsv(), encoding="utf-8")
    last = report.epochs[-1]
    print(f"done: {len(report.epochs)} epochs, train_nll={last.train_nll:.4f}, "
          f"dev_ppl={last.dev_ppl:.4f}, checkpoints in {out_dir / 'checkpoints'}")
    return 0


def _load_model_and_vocabs(model_path):
    params = load_checkpoint(model_path)
    model_dir = Path(model_path).parent
    candidates = [model_dir, model_dir.parent]
    for base in candidates:
        src_path, tgt_path = _vocab_dir_paths(base)
        if src_path.exists() and tgt_path.exists():
            return params, Vocab.load(src_path), Vocab.load(tgt_path)
    raise DataError(
        f"could not find src_vocab.tsv/tgt_vocab.tsv next to {model_path} "
        f"(looked in {', '.join(str(c) for c in candidates)})"
    )


def _cmd_translate(args) -> int:
    table = load_radical_table(args.han_table, args.kana_table)
    params, src_vocab, tgt_vocab = _load_model_and_vocabs(args.model)
    count = translate_file(
        params, table, src_vocab, tgt_vocab, args.input, args.output,
        beam_size=args.beam, max_len=args.max_len, length_alpha=args.length_norm,
        unk_token=args.unk_token,
    )
    write_run_manifest(
        Path(args.output).with_suffix(Path(args.output).suffix + ".manifest.json"),
        "translate",
        {"beam": args.beam, "length_norm": args.length_norm},
        0,
        {"model": args.model, "input": args.input},
    )
    print(f"translated {count} lines -> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    table = load_radical_table(args.han_table, args.kana_table)
    params, src_vocab, tgt_vocab = _load_model_and_vocabs(args.model)
    result = evaluate(
        params, table, src_vocab, tgt_vocab, args.src, args.ref,
        out_dir=args.out, tokenization=args.tokenization,
        beam_size=args.beam, smoothing=args.smoothing,
    )
    if args.out:
        write_run_manifest(
            Path(args.out) / "run_manifest.json", "eval",
            {"tokenization": args.tokenization, "beam": args.beam}, 0,
            {"model": args.model, "src": args.src, "ref": args.ref},
        )
    print(f"ppl={result['ppl']:.4f} bleu={result['bleu']:.2f} "
          f"(bp={result['brevity_penalty']:.4f}, {result['sentences']} sentences)")
    return 0


def _cmd_gradcheck(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("RADNMT_SEED", "0"))
    config = ModelConfig(
        src_vocab_size=8, tgt_vocab_size=8, char_embed_dim=4, feat_embed_dim=2,
        hidden_size=4, feat_vocab_size=8, dropout=0.0,
    )
    params = ModelParams.initialize(config, seed)
    rng = derive_rng(seed, "gradcheck-data")
    from .corpus import Batch

    src = rng.integers(4, 8, size=(1, 3))
    feats = rng.integers(1, 8, size=(1, 3))
    tgt = np.array([[1, int(rng.integers(4, 8)), 2]], dtype=np.int64)
    batch = Batch(src, feats, np.ones_like(src, dtype=bool), tgt, np.ones_like(tgt, dtype=bool))

    def loss():
        # mean per-token loss keeps the fd oracle's absolute noise small
        total, count = forward_loss(batch, params, train=False)
        return ad.mul(total, ad.Tensor(np.asarray(1.0 / count)))

    err = ad.grad_check(loss, params.all(), eps=2e-3)
    ok = err <= args.tolerance
    print(f"max relative error: {err:.3e} ({'PASS' if ok else 'FAIL'} at {args.tolerance:g})")
    return 0 if ok else 3


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 0
        handler = {
            "annotate": _cmd_annotate,
            "build-vocab": _cmd_build_vocab,
            "train": _cmd_train,
            "translate": _cmd_translate,
            "eval": _cmd_eval,
            "gradcheck": _cmd_gradcheck,
        }[args.command]
        return handler(args)
    except SystemExit as exc:  # argparse --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (OSError, RadnmtError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
