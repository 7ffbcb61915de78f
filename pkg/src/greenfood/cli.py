"""``greenfood`` command line: prepare, stats, synth, train, evaluate, ablate.

Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, RunConfig
from .data.corpus import CorpusError, user_green_profile, write_corpus
from .data.synth import SynthConfigError, synth_generate
from .losses import LossConfigError
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.config import ModelConfigError
from .traineval import metrics
from .traineval.ablation import ABLATION_KINDS, AblationError, ablate, corpus_from_config, train_from_config
from .traineval.report import emit_report, write_training_log

log = logging.getLogger("greenfood")

VERBS = ("prepare", "stats", "synth", "train", "evaluate", "ablate")
VALIDATION_ERRORS = (ConfigError, CorpusError, SynthConfigError, LossConfigError, ModelConfigError, AblationError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greenfood", description="Green food recommender pipeline.")
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", required=True, help="flat JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--kind", choices=ABLATION_KINDS, help="ablation to run (ablate only)")
    return parser


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_prepare(cfg: RunConfig, out: Path) -> dict:
    corpus = corpus_from_config(cfg)
    write_corpus(corpus.log, out)
    log_ = corpus.log
    with open(out / "splits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "position", "item_id", "split"])
        for s in corpus.sequences:
            last = len(s.items) - 1
            for pos, item in enumerate(s.items):
                split = "test" if pos == last else "valid" if pos == last - 1 else "train"
                w.writerow([s.user_id, pos, log_.item_ids[item], split])
    summary = dict(log_.counts())
    summary["sequence_users"] = len(corpus.sequences)
    summary["indicators"] = [s.name for s in corpus.specs]
    _write_json(out / "summary.json", summary)
    return summary


def cmd_stats(cfg: RunConfig, out: Path) -> dict:
    corpus = corpus_from_config(cfg)
    profile = user_green_profile(corpus.sequences, corpus.log.specs)
    names = list(profile)
    with open(out / "user_profile.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank"] + [f"{n}_{c}" for n in names for c in ("user_id", "mean", "var")])
        for rank in range(len(corpus.sequences)):
            row = [rank + 1]
            for n in names:
                r = profile[n][rank]
                row += [r.user_id, repr(r.mean), repr(r.variance)]
            w.writerow(row)
    return {"users": len(corpus.sequences), "indicators": names}


def cmd_synth(cfg: RunConfig, out: Path) -> dict:
    synthetic = synth_generate(cfg.synth_config(), cfg["seed"])
    return synthetic.write(out)


def _checkpoint_path(cfg: RunConfig, out: Path) -> Path:
    return cfg.path("checkpoint_path") or out / "checkpoint.bin"


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    corpus = corpus_from_config(cfg)
    result = train_from_config(corpus, cfg)
    ckpt = _checkpoint_path(cfg, out)
    save_checkpoint(ckpt, result.config, result.params, {"metadata": result.test_report.metadata})
    write_training_log(result.history, out / "training_log.csv")
    emit_report(result.test_report, out)
    return {"checkpoint": str(ckpt), "best_epoch": result.best_epoch,
            "test": result.test_report.to_dict()["cutoffs"]}


def cmd_evaluate(cfg: RunConfig, out: Path) -> dict:
    corpus = corpus_from_config(cfg)
    mcfg, params, extra = load_checkpoint(_checkpoint_path(cfg, out))
    if (mcfg.num_items, mcfg.num_users, mcfg.n) != (corpus.num_items, corpus.num_users, corpus.n):
        raise ConfigError("checkpoint_path", "checkpoint was trained on a different corpus")
    report = metrics.evaluate(params, mcfg, corpus, "test", cfg["eval_cutoffs"], extra.get("metadata", {}))
    emit_report(report, out)
    return {"test": report.to_dict()["cutoffs"]}


def cmd_ablate(cfg: RunConfig, out: Path, kind: Optional[str]) -> dict:
    if kind is None:
        raise UsageError("ablate requires --kind " + "{" + ",".join(ABLATION_KINDS) + "}")
    corpus = corpus_from_config(cfg)
    runs = ablate(kind, corpus, cfg)
    paths = emit_report([(r.coords, r.report) for r in runs], out, stem=f"ablation_{kind}")
    return {"runs": len(runs), **{k: str(v) for k, v in paths.items()}}


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.kind is not None and args.verb != "ablate":
            raise UsageError("--kind is only valid with the ablate verb")
        cfg = RunConfig.load(args.config)
        for assignment in args.set:
            cfg.override(assignment)
        if args.seed is not None:
            cfg.set("seed", args.seed)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"greenfood: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.verb == "ablate":
            summary = cmd_ablate(cfg, out, args.kind)
        else:
            summary = globals()[f"cmd_{args.verb}"](cfg, out)
    except UsageError as exc:
        print(f"greenfood: {exc}", file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as exc:
        print(f"greenfood: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: report and exit 2
        log.debug("command failed", exc_info=True)
        print(f"greenfood: {args.verb} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return 0


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    sys.exit(run())


if __name__ == "__main__":
    main()
