"""Command-line entry point: ``seqcopynet {preprocess,train,decode,eval}``.

Every command accepts ``--config FILE`` with ``key=value`` lines (``#``
starts a comment). Keys are the long option names with dashes or
underscores; flags given on the command line win over the file.

Defaults marked [full-scale] are the original large-corpus settings. They are far
too large for a laptop run; see ``demos/desk.conf`` for small values.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checkpoint import load_model
from .errors import InvalidArgumentError, SeqCopyError
from .evalmetrics import bleu4, corpus_rouge, format_report
from .model import ModelConfig, SeqCopyNet
from .search import beam_decode, copy_ids_for, format_trace, greedy_decode, replace_unk
from .spanoracle import (Vocabulary, build_vocab, corpus_stats, load_instances, make_instance,
                         read_corpus, save_instances)
from .training import TrainConfig, train

FULL_SCALE = " [full-scale]"


def _add_common(p):
    p.add_argument("--config", help="key=value file with defaults for this command")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqcopynet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build vocabularies, copy-span annotations and copy statistics")
    _add_common(p)
    p.add_argument("--train", required=True, help="training corpus, one 'source<TAB>target' pair per line")
    p.add_argument("--dev", help="development corpus, same format")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int, default=20, help="vocabulary frequency threshold (default 20)" + FULL_SCALE)
    p.add_argument("--max-copy-len", type=int, default=5, help="longest copyable span (default 5)" + FULL_SCALE)

    p = sub.add_parser("train", help="train a model on preprocessed data")
    _add_common(p)
    p.add_argument("--data", required=True, help="directory written by 'preprocess'")
    p.add_argument("--out", required=True, help="checkpoint directory (gets train.log too)")
    p.add_argument("--emb-size", type=int, default=300, help="word embedding size (default 300)" + FULL_SCALE)
    p.add_argument("--hidden-size", type=int, default=512, help="GRU hidden size (default 512)" + FULL_SCALE)
    p.add_argument("--dropout", type=float, default=0.4, help="dropout probability (default 0.4)" + FULL_SCALE)
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default 0.001)" + FULL_SCALE)
    p.add_argument("--clip", type=float, default=5.0, help="element-wise gradient clip (default 5)" + FULL_SCALE)
    p.add_argument("--batch-size", type=int, default=64, help="mini-batch size (default 64)" + FULL_SCALE)
    p.add_argument("--eval-every", type=int, default=2000, help="batches between dev tests (default 2000)" + FULL_SCALE)
    p.add_argument("--decay-patience", type=int, default=6,
                   help="halve lr after this many dev tests without improvement (default 6)" + FULL_SCALE)
    p.add_argument("--max-copy-len", type=int, default=5, help="longest copyable span (default 5)" + FULL_SCALE)
    p.add_argument("--max-epochs", type=int, default=10, help="passes over the data (default 10)")
    p.add_argument("--max-steps", type=int, help="stop after this many batches")
    p.add_argument("--dev-metric", choices=("loss", "rouge2"), default="loss", help="dev criterion (default loss)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    p = sub.add_parser("decode", help="decode source sentences with a trained model")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="directory holding src.vocab and tgt.vocab")
    p.add_argument("--input", required=True, help="one tokenized source per line (a TAB and anything after is ignored)")
    p.add_argument("--output", help="write here instead of stdout")
    p.add_argument("--beam", type=int, default=8, help="beam size, 1 means greedy (default 8)" + FULL_SCALE)
    p.add_argument("--max-steps", type=int, default=50, help="decoder steps per sentence (default 50)")
    p.add_argument("--trace", action="store_true", help="mark copied spans with brackets")

    p = sub.add_parser("eval", help="score decoded output against references")
    _add_common(p)
    p.add_argument("--hyp", required=True, help="one decoded sentence per line")
    p.add_argument("--ref", required=True, help="references, one per line; with a TAB the target side is used")
    p.add_argument("--output", help="write the report here instead of stdout")
    return parser


# ---------------------------------------------------------------- config files

def read_config(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgumentError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(sub_parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise InvalidArgumentError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except ValueError:
                raise InvalidArgumentError(f"bad value for {key}: {value!r}") from None
            if action.choices and defaults[key] not in action.choices:
                raise InvalidArgumentError(f"{key} must be one of {list(action.choices)}")
        action.required = False
    sub_parser.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and argv and not argv[0].startswith("-"):
        sub_parser = parser._subparsers._group_actions[0].choices.get(argv[0])
        if sub_parser is not None:
            _apply_config(sub_parser, read_config(known.config))
    return parser.parse_args(argv)


# ---------------------------------------------------------------- commands

def cmd_preprocess(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = read_corpus(args.train)
    src_vocab = build_vocab(pairs, args.min_count, "source")
    tgt_vocab = build_vocab(pairs, args.min_count, "target")
    src_vocab.save(out / "src.vocab")
    tgt_vocab.save(out / "tgt.vocab")
    splits = [("train", pairs)]
    if args.dev:
        splits.append(("dev", read_corpus(args.dev)))
    lines = []
    for name, data in splits:
        insts = [make_instance(s, t, src_vocab, tgt_vocab, args.max_copy_len) for s, t in data if s and t]
        save_instances(out / f"{name}.jsonl", insts)
        st = corpus_stats(insts)
        lines.append(f"{name}\tpairs={len(insts)}\tgenerated={st.fraction_generated:.4f}"
                     f"\tcopied_single={st.fraction_single_copy:.4f}\tcopied_multi={st.fraction_multi_copy:.4f}")
    (out / "meta.txt").write_text(f"max_copy_len={args.max_copy_len}\n", encoding="utf-8")
    report = "\n".join(lines) + "\n"
    (out / "stats.txt").write_text(report, encoding="utf-8")
    sys.stdout.write(report)


def _vocabs(data_dir):
    data_dir = Path(data_dir)
    return Vocabulary.load(data_dir / "src.vocab"), Vocabulary.load(data_dir / "tgt.vocab")


def cmd_train(args) -> None:
    data = Path(args.data)
    src_vocab, tgt_vocab = _vocabs(data)
    train_set = load_instances(data / "train.jsonl", src_vocab, tgt_vocab, args.max_copy_len)
    dev_path = data / "dev.jsonl"
    dev_set = load_instances(dev_path, src_vocab, tgt_vocab, args.max_copy_len) if dev_path.exists() else []
    mcfg = ModelConfig(len(src_vocab), len(tgt_vocab), args.emb_size, args.hidden_size, args.max_copy_len)
    tcfg = TrainConfig(batch_size=args.batch_size, lr=args.lr, clip=args.clip, dropout_p=args.dropout,
                       eval_every=args.eval_every, decay_patience=args.decay_patience,
                       max_copy_len=args.max_copy_len, seed=args.seed, max_epochs=args.max_epochs,
                       max_steps=args.max_steps, dev_metric=args.dev_metric)
    model = SeqCopyNet.initialize(mcfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(tcfg, train_set, dev_set, model, checkpoint_dir=out, log_path=out / "train.log",
                   tgt_vocab=tgt_vocab)
    if result.checkpoints:
        print(result.checkpoints[-1])


def cmd_decode(args) -> None:
    src_vocab, tgt_vocab = _vocabs(args.data)
    model = load_model(args.checkpoint)
    if model.config.src_vocab_size != len(src_vocab) or model.config.tgt_vocab_size != len(tgt_vocab):
        raise InvalidArgumentError("checkpoint vocabulary sizes do not match the vocab files")
    if args.beam < 1:
        raise InvalidArgumentError("--beam must be at least 1")
    lines = []
    with open(args.input, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            src = raw.rstrip("\n").split("\t", 1)[0].split()
            if not src:
                raise InvalidArgumentError(f"{args.input}:{lineno}: empty source sentence")
            kwargs = dict(max_steps=args.max_steps, copy_ids=copy_ids_for(src, tgt_vocab), src_tokens=src)
            if args.beam == 1:
                hyp = greedy_decode(model, src_vocab.encode(src), **kwargs)
            else:
                hyp = beam_decode(model, src_vocab.encode(src), beam_size=args.beam, **kwargs)
            if args.trace:
                lines.append(format_trace(hyp, src, tgt_vocab))
            else:
                lines.append(" ".join(replace_unk(hyp, src, tgt_vocab)))
    _emit("\n".join(lines) + "\n" if lines else "", args.output)


def _read_lines(path, target_side=False):
    out = []
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.rstrip("\n")
            if target_side and "\t" in line:
                line = line.split("\t", 1)[1]
            out.append(line.split())
    return out


def cmd_eval(args) -> None:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref, target_side=True)
    if len(hyps) != len(refs):
        raise InvalidArgumentError(f"{len(hyps)} hypotheses but {len(refs)} references")
    _emit(format_report(corpus_rouge(hyps, refs), bleu4(hyps, refs)), args.output)


def _emit(text, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


COMMANDS = {"preprocess": cmd_preprocess, "train": cmd_train, "decode": cmd_decode, "eval": cmd_eval}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        COMMANDS[args.command](args)
    except (SeqCopyError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"seqcopynet: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
