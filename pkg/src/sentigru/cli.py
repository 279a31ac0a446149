"""Command-line entry point.

Subcommands: stats, preprocess, train, evaluate, predict, summary.
Settings resolve in three layers: built-in defaults, then an optional
--config (the "paper" preset or a key=value file), then explicit flags.
Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus as corpus_mod
from . import metrics, serialize, trainer, wordstats
from . import model as model_mod


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; route through UsageError
    # so main() can map usage problems to exit code 1 instead
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


_DEFAULTS = {
    "data": None, "stopwords": None, "model": None, "out": None,
    "history": None, "text": None,
    "epochs": 5, "batch_size": 64, "lr": 1e-3, "seed": 0,
    "seq_len": 79, "vocab_size": 50_000, "embed_dim": 50,
    "gru_units": "120,64,64", "dropout": 0.3, "split": 0.8,
    "stratify": False, "deterministic": False, "keep_stopwords": False,
    "precision": "f32", "delimiter": ",", "top": 50,
}

# pins the reference hyperparameters even if the defaults above drift
_PAPER_PRESET = {
    "seq_len": 79, "vocab_size": 50_000, "embed_dim": 50,
    "gru_units": "120,64,64", "dropout": 0.3, "precision": "f32",
    "epochs": 5, "batch_size": 64, "lr": 1e-3, "split": 0.8,
}

_BOOL_KEYS = {"stratify", "deterministic", "keep_stopwords"}
_INT_KEYS = {"epochs", "batch_size", "seed", "seq_len", "vocab_size",
             "embed_dim", "top"}
_FLOAT_KEYS = {"lr", "dropout", "split"}


def _coerce(key: str, value: str):
    try:
        if key in _BOOL_KEYS:
            low = value.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        return value
    except ValueError as exc:
        raise UsageError(f"bad value for config key {key!r}: {exc}") from exc


def _read_config_file(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise UsageError(f"expected key=value at line {lineno}: {line!r}")
            if key not in _DEFAULTS:
                raise UsageError(f"unknown config key {key!r} at line {lineno}")
            out[key] = _coerce(key, value.strip())
    return out


def _settings(args) -> dict:
    s = dict(_DEFAULTS)
    if args.config:
        s.update(_PAPER_PRESET if args.config == "paper"
                 else _read_config_file(args.config))
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            s[key] = value
    return s


def _require(s: dict, *keys):
    for key in keys:
        if s[key] is None:
            flag = "--" + key.replace("_", "-")
            raise UsageError(f"{flag} is required for this command")


def _parse_units(value) -> tuple:
    try:
        return tuple(int(p) for p in str(value).split(","))
    except ValueError:
        raise UsageError(f"bad gru-units value {value!r}, expected e.g. 120,64,64")


def _model_config(s: dict) -> model_mod.ModelConfig:
    dtype = {"f32": "float32", "f64": "float64"}.get(s["precision"])
    if dtype is None:
        raise UsageError(f"precision must be f32 or f64, got {s['precision']!r}")
    try:
        return model_mod.ModelConfig(
            vocab_size=s["vocab_size"], embed_dim=s["embed_dim"],
            seq_len=s["seq_len"], gru_units=_parse_units(s["gru_units"]),
            dropout_rate=s["dropout"], num_classes=6, dtype=dtype)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _train_config(s: dict) -> trainer.TrainConfig:
    try:
        return trainer.TrainConfig(
            epochs=s["epochs"], batch_size=s["batch_size"],
            learning_rate=s["lr"], seed=s["seed"],
            train_fraction=s["split"], stratify=s["stratify"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _stoplist(s: dict) -> frozenset:
    if s["keep_stopwords"]:
        return frozenset()
    if s["stopwords"]:
        return corpus_mod.load_stopwords(s["stopwords"])
    return corpus_mod.default_stopwords()


def _load_corpus(s: dict) -> corpus_mod.LabeledCorpus:
    _require(s, "data")
    return corpus_mod.load_dataset(s["data"], delimiter=s["delimiter"])


def _emit(doc, out_path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _shape_str(shape) -> str:
    return "(" + ", ".join(["None"] + [str(d) for d in shape]) + ")"


def _cmd_summary(args) -> int:
    s = _settings(args)
    if s["model"]:
        model, _ = serialize.load(s["model"])
    else:
        model = model_mod.build_model(_model_config(s), seed=s["seed"])
    rows = model.summary()
    name_w = max(len(r.name) for r in rows) + 2
    shape_w = max(len(_shape_str(r.output_shape)) for r in rows) + 2
    print(f"{'layer':<{name_w}}{'output shape':<{shape_w}}{'params':>10}")
    print("-" * (name_w + shape_w + 10))
    for r in rows:
        print(f"{r.name:<{name_w}}{_shape_str(r.output_shape):<{shape_w}}"
              f"{r.param_count:>10}")
    print("-" * (name_w + shape_w + 10))
    print(f"{'total':<{name_w}}{'':<{shape_w}}{model.total_param_count():>10}")
    return 0


def _cmd_stats(args) -> int:
    s = _settings(args)
    corpus = _load_corpus(s)
    custom = corpus_mod.load_stopwords(s["stopwords"]) if s["stopwords"] else None
    tables = wordstats.frequency_by_label(
        corpus, apply_stopwords=not s["keep_stopwords"], stoplist=custom)
    docs = {t.label_name: wordstats.table_to_dict(t, s["top"])
            for t in tables.values()}
    if s["out"]:
        out_dir = Path(s["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, doc in docs.items():
            _emit(doc, out_dir / f"{name}.json")
        print(f"wrote {len(docs)} tables to {out_dir}", file=sys.stderr)
    else:
        _emit(docs, None)
    return 0


def _cmd_preprocess(args) -> int:
    s = _settings(args)
    corpus = _load_corpus(s)
    stoplist = _stoplist(s)
    token_lists = [corpus_mod.text_to_tokens(r.text, stoplist)
                   for r in corpus.records]
    try:
        vocab = corpus_mod.build_vocabulary(token_lists, max_size=s["vocab_size"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {
        "seq_len": s["seq_len"],
        "vocab_size": vocab.size,
        "records": [{
            "label": rec.label,
            "label_name": corpus_mod.LABEL_NAMES[rec.label],
            "tokens": tokens,
            "ids": corpus_mod.encode(tokens, vocab, s["seq_len"]).tolist(),
        } for rec, tokens in zip(corpus.records, token_lists)],
    }
    _emit(doc, s["out"])
    return 0


def _cmd_train(args) -> int:
    s = _settings(args)
    _require(s, "data", "out")
    corpus = _load_corpus(s)
    stoplist = _stoplist(s)
    token_lists = [corpus_mod.text_to_tokens(r.text, stoplist)
                   for r in corpus.records]
    vocab = corpus_mod.build_vocabulary(token_lists, max_size=s["vocab_size"])
    model = model_mod.build_model(_model_config(s), seed=s["seed"])
    history = trainer.fit(model, corpus, _train_config(s), vocab, stoplist)
    serialize.save(model, vocab, s["out"])
    if s["deterministic"]:
        # wall time is the one non-reproducible field; zero it so identical
        # runs write identical history files
        history = [replace(r, seconds=0.0) for r in history]
    for r in history:
        print(f"epoch {r.epoch}: train_loss={r.train_loss:.4f} "
              f"train_acc={r.train_acc:.4f} val_loss={r.val_loss:.4f} "
              f"val_acc={r.val_acc:.4f} ({r.seconds:.1f}s)", file=sys.stderr)
    if s["history"]:
        Path(s["history"]).write_text(
            json.dumps([r.to_dict() for r in history], indent=2) + "\n",
            encoding="utf-8")
    print(f"saved model to {s['out']}", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    s = _settings(args)
    _require(s, "model")
    model, vocab = serialize.load(s["model"])
    corpus = _load_corpus(s)
    stoplist = _stoplist(s)
    ids, labels = corpus_mod.encode_corpus(
        corpus, vocab, model.config.seq_len, stoplist)
    pred = trainer.predict_codes(model, ids, s["batch_size"])
    report = metrics.report_from_predictions(
        labels, pred, model.config.num_classes)
    names = (corpus_mod.LABEL_NAMES
             if model.config.num_classes == len(corpus_mod.LABEL_NAMES) else None)
    _emit(report.to_dict(names), s["out"])
    print(f"accuracy={report.accuracy:.4f} on {len(labels)} records",
          file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    s = _settings(args)
    _require(s, "model", "text")
    model, vocab = serialize.load(s["model"])
    code, name, probs = model_mod.predict(
        model, vocab, s["text"], stopwords=_stoplist(s))
    _emit({"label": code, "label_name": name,
           "probabilities": [float(p) for p in probs]}, s["out"])
    return 0


_COMMANDS = {
    "stats": (_cmd_stats, "per-label word-frequency tables as JSON"),
    "preprocess": (_cmd_preprocess, "emit cleaned, tokenized, encoded records"),
    "train": (_cmd_train, "train a model and save it with its vocabulary"),
    "evaluate": (_cmd_evaluate, "confusion matrix and metric views as JSON"),
    "predict": (_cmd_predict, "classify one text with a saved model"),
    "summary": (_cmd_summary, "per-layer output shapes and parameter counts"),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="sentigru",
                     description="text sentiment classifier: six emotions, "
                                 "bidirectional recurrent model")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (func, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="'paper' preset or key=value file")
        p.add_argument("--data", help="labeled CSV/TSV input")
        p.add_argument("--stopwords", help="custom stopword file, one per line")
        p.add_argument("--keep-stopwords", action="store_true", default=None,
                       help="skip stopword filtering")
        p.add_argument("--model", help="saved model file")
        p.add_argument("--out", help="output path (directory for stats)")
        p.add_argument("--history", help="write per-epoch history JSON here")
        p.add_argument("--text", help="text to classify (predict)")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--seq-len", type=int)
        p.add_argument("--vocab-size", type=int)
        p.add_argument("--embed-dim", type=int)
        p.add_argument("--gru-units", help="three comma-separated unit counts")
        p.add_argument("--dropout", type=float)
        p.add_argument("--split", type=float, help="train fraction, e.g. 0.8")
        p.add_argument("--stratify", action="store_true", default=None)
        p.add_argument("--deterministic", action="store_true", default=None)
        p.add_argument("--precision", choices=["f32", "f64"])
        p.add_argument("--delimiter")
        p.add_argument("--top", type=int, help="entries per stats table")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage())
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (corpus_mod.DatasetError, serialize.ModelFormatError,
            trainer.TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
