"""Command-line surface: generate synthetic data, train adapters, evaluate
checkpoints, and compare all three methods side by side.

Reports written to disk store fractions; only the tables printed to stdout
render percentages (3 decimals). All outputs are timestamp-free and
deterministic for a fixed config and seed.

Exit codes: 0 success, 2 usage or bad parameter, 3 I/O, 4 data validation,
5 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bayes_adapter import BayesConfig, predict_bayes, train_bayes
from .data import (
    SECTION_POSTERIOR,
    SECTION_WEIGHTS,
    decode_posterior,
    decode_weights,
    encode_posterior,
    encode_weights,
    few_shot_sample,
    load_badf,
    read_badf,
    save_badf,
    synth_generate,
)
from .errors import (
    DataError,
    DivergenceError,
    ParamError,
    ProtoadaptError,
    ShapeError,
)
from .map_adapter import MapConfig, train_map
from .metrics import calibration_bins, coverage_at, records_from_probs
from .model import FeatureSet, Prototypes, predict_point

SECTION_META = "META1"

DEFAULT_LEVELS = (0.99, 0.95, 0.90, 0.85, 0.80)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_DIVERGED = 5


@dataclass
class RunConfig:
    method: str = "bayes"
    input: str = ""
    shots: int = 16
    seed: int = 0
    epochs: int = 300
    batch_size: int = 256
    lr: float = 0.1
    momentum: float = 0.9
    prior_std: float = 0.01
    mc_train: int = 3
    mc_predict: int = 100
    scale: float = 30.0
    map_lambda: float | None = None
    levels: tuple[float, ...] = DEFAULT_LEVELS
    bins: int = 10
    format: str = "json"
    deterministic: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels"] = list(self.levels)
        return d

    def bayes_config(self) -> BayesConfig:
        return BayesConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            s_mc_train=self.mc_train,
            s_mc_predict=self.mc_predict,
            prior_std=self.prior_std,
            seed=self.seed,
            scale=self.scale,
        )

    def map_config(self) -> MapConfig:
        return MapConfig(
            lambdas=self.map_lambda,
            prior_std=self.prior_std,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            seed=self.seed,
            scale=self.scale,
        )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="BADF data file")
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--prior-std", type=float, default=0.01)
    p.add_argument("--mc-train", type=int, default=3)
    p.add_argument("--mc-predict", type=int, default=100)
    p.add_argument("--scale", type=float, default=30.0)
    p.add_argument("--map-lambda", type=float, default=None,
                   help="override the per-class pull weight (default 1/(2 prior_std^2))")
    p.add_argument("--levels", default="0.99,0.95,0.90,0.85,0.80",
                   help="comma-separated confidence levels")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--deterministic", action="store_true",
                   help="pin reductions to a fixed sequential order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoadapt",
        description="Few-shot prototype adapters with uncertainty evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic BADF dataset")
    p_synth.add_argument("--classes", type=int, default=5)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--per-class", type=int, default=250)
    p_synth.add_argument("--spread", type=float, default=0.4)
    p_synth.add_argument("--proto-noise", type=float, default=0.2)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)

    p_train = sub.add_parser("train", help="train an adapter checkpoint")
    p_train.add_argument("--method", choices=("map", "bayes"), required=True)
    p_train.add_argument("--out", required=True, help="checkpoint path")
    p_train.add_argument("--manifest", default=None,
                         help="manifest path (default: <out>.manifest.json)")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a method on a dataset")
    p_eval.add_argument("--method", choices=("zeroshot", "map", "bayes"), required=True)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--eval-split", choices=("all", "query", "support"),
                        default="all")
    _add_common(p_eval)

    p_cmp = sub.add_parser("compare", help="train and evaluate all three methods")
    p_cmp.add_argument("--out-dir", required=True)
    _add_common(p_cmp)

    return parser


def _config_from_args(args, method=None) -> RunConfig:
    levels = tuple(float(s) for s in str(args.levels).split(",") if s)
    if not levels:
        raise ParamError("need at least one confidence level")
    for lv in levels:
        if not 0.0 < lv < 1.0:
            raise ParamError(f"confidence level {lv} outside (0, 1)")
    return RunConfig(
        method=method or getattr(args, "method", "bayes"),
        input=args.input,
        shots=args.shots,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        prior_std=args.prior_std,
        mc_train=args.mc_train,
        mc_predict=args.mc_predict,
        scale=args.scale,
        map_lambda=args.map_lambda,
        levels=levels,
        bins=args.bins,
        format=args.format,
        deterministic=args.deterministic,
    )


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pct(v: float) -> str:
    return f"{100.0 * v:.3f}"


def _evaluate_probs(probs, labels, n_classes, cfg: RunConfig) -> dict:
    records = records_from_probs(probs, labels)
    rep = calibration_bins(records, cfg.bins)
    coverage = [coverage_at(records, lv, n_classes).to_dict() for lv in cfg.levels]
    return {
        "n_evaluated": len(records),
        "accuracy": rep.overall_accuracy,
        "ece": rep.ece,
        "aece": rep.aece,
        "overall_mean_confidence": rep.overall_mean_confidence,
        "bins": [b.to_dict() for b in rep.bins],
        "coverage": coverage,
    }


def _eval_rows(payload: dict) -> list[tuple[str, str, str]]:
    rows = [
        ("accuracy", "", repr(payload["accuracy"])),
        ("ece", "", repr(payload["ece"])),
        ("aece", "", repr(payload["aece"])),
        ("mean_confidence", "", repr(payload["overall_mean_confidence"])),
    ]
    for cov in payload["coverage"]:
        lv = repr(cov["level"])
        rows.append(("coverage", lv, repr(cov["coverage"])))
        rows.append(("selected_accuracy", lv, repr(cov["selected_accuracy"])))
        rows.append(("classwise_coverage", lv, repr(cov["classwise_coverage"])))
        rows.append(("reliable", lv, "1" if cov["reliable"] else "0"))
    return rows


def _write_eval_csv(path, payload) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "level", "value"])
        w.writerows(_eval_rows(payload))


def _print_eval_table(method: str, payload: dict) -> None:
    print(f"method: {method}  (n={payload['n_evaluated']})")
    print(f"  accuracy  {_pct(payload['accuracy'])}%")
    print(f"  ece       {_pct(payload['ece'])}%")
    print(f"  aece      {_pct(payload['aece'])}%")
    header = "  coverage@ " + "  ".join(f"{100 * c['level']:.0f}%" for c in payload["coverage"])
    print(header)
    print(
        "            "
        + "  ".join(
            _pct(c["coverage"]) if c["reliable"] else f"x({_pct(c['coverage'])})"
            for c in payload["coverage"]
        )
    )


def _split_dataset(feats: FeatureSet, cfg: RunConfig):
    split = few_shot_sample(feats.labels, cfg.shots, cfg.seed)
    return split, feats.subset(split.support_indices), feats.subset(split.query_indices)


def _train_method(method: str, support: FeatureSet, protos: Prototypes, cfg: RunConfig):
    """Returns (section_tag, payload_bytes, trajectory)."""
    if method == "map":
        w, traj = train_map(support, protos, cfg.map_config())
        return SECTION_WEIGHTS, encode_weights(w), traj
    q, traj = train_bayes(support, protos, cfg.bayes_config())
    return SECTION_POSTERIOR, encode_posterior(q), traj


def _checkpoint_sections(tag, payload, method, cfg: RunConfig) -> dict[str, bytes]:
    meta = {"method": method, "config": cfg.to_dict()}
    return {
        tag: payload,
        SECTION_META: json.dumps(meta, sort_keys=True).encode(),
    }


def cmd_synth(args) -> int:
    feats, protos = synth_generate(
        args.classes, args.dim, args.per_class, args.spread, args.proto_noise,
        args.seed,
    )
    save_badf(args.out, feats, protos)
    print(f"wrote {args.out}: N={feats.n} D={feats.dim} C={protos.n_classes}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    feats, protos = load_badf(cfg.input)
    split, support, _ = _split_dataset(feats, cfg)
    tag, payload, traj = _train_method(cfg.method, support, protos, cfg)
    save_badf(
        args.out,
        support,
        protos,
        sections=_checkpoint_sections(tag, payload, cfg.method, cfg),
    )
    manifest_path = args.manifest or f"{args.out}.manifest.json"
    _write_json(
        manifest_path,
        {
            "schema": "protoadapt-manifest/1",
            "command": "train",
            "method": cfg.method,
            "config": cfg.to_dict(),
            "split": {
                "k": split.k,
                "seed": split.seed,
                "support_size": int(split.support_indices.size),
                "query_size": int(split.query_indices.size),
            },
            "trajectory": traj,
            "checkpoint": Path(args.out).name,
        },
    )
    print(f"wrote {args.out} and {manifest_path}")
    return EXIT_OK


def _load_eval_weights(method: str, checkpoint, data_dim: int, scale: float):
    """Returns ('point', w) or ('posterior', q) from a checkpoint file."""
    if checkpoint is None:
        raise ParamError(f"--checkpoint is required for method {method!r}")
    raw = read_badf(checkpoint)
    c, d = raw.prototypes.shape
    if d != data_dim:
        raise ShapeError(f"checkpoint dim {d} does not match data dim {data_dim}")
    if SECTION_META in raw.sections:
        meta = json.loads(raw.sections[SECTION_META])
        trained_scale = meta.get("config", {}).get("scale")
        if trained_scale is not None and trained_scale != scale:
            print(
                f"warning: checkpoint was trained with scale {trained_scale}, "
                f"evaluating with {scale}",
                file=sys.stderr,
            )
    if method == "map":
        if SECTION_WEIGHTS not in raw.sections:
            raise DataError("checkpoint has no point-weight section; was it trained with --method map?")
        return "point", decode_weights(raw.sections[SECTION_WEIGHTS], c, d)
    if SECTION_POSTERIOR not in raw.sections:
        raise DataError("checkpoint has no posterior section; was it trained with --method bayes?")
    return "posterior", decode_posterior(raw.sections[SECTION_POSTERIOR], c, d)


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    feats, protos = load_badf(cfg.input)
    if args.eval_split != "all":
        _, support, query = _split_dataset(feats, cfg)
        feats = support if args.eval_split == "support" else query
        if feats.n == 0:
            raise DataError(f"{args.eval_split} split is empty")

    if cfg.method == "zeroshot":
        probs = predict_point(protos.matrix, feats, cfg.scale)
    else:
        kind, model = _load_eval_weights(cfg.method, args.checkpoint, feats.dim, cfg.scale)
        if kind == "point":
            probs = predict_point(model, feats, cfg.scale)
        else:
            probs = predict_bayes(model, feats, cfg.mc_predict, cfg.seed, cfg.scale)

    payload = _evaluate_probs(probs, feats.labels, protos.n_classes, cfg)
    report = {
        "schema": "protoadapt-eval-report/1",
        "method": cfg.method,
        "config": cfg.to_dict(),
        **payload,
    }
    if cfg.format == "json":
        _write_json(args.report, report)
    else:
        _write_eval_csv(args.report, payload)
    _print_eval_table(cfg.method, payload)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config_from_args(args, method="compare")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    feats, protos = load_badf(cfg.input)
    split, support, query = _split_dataset(feats, cfg)
    if query.n == 0:
        raise DataError("query split is empty; reduce --shots")

    methods: dict[str, dict] = {}
    methods["zeroshot"] = _evaluate_probs(
        predict_point(protos.matrix, query, cfg.scale), query.labels,
        protos.n_classes, cfg,
    )
    for method in ("map", "bayes"):
        tag, payload, traj = _train_method(method, support, protos, cfg)
        ckpt = out_dir / f"{method}.ckpt.badf"
        save_badf(
            ckpt, support, protos,
            sections=_checkpoint_sections(tag, payload, method, cfg),
        )
        if method == "map":
            w = decode_weights(read_badf(ckpt).sections[SECTION_WEIGHTS],
                               protos.n_classes, protos.dim)
            probs = predict_point(w, query, cfg.scale)
        else:
            q = decode_posterior(read_badf(ckpt).sections[SECTION_POSTERIOR],
                                 protos.n_classes, protos.dim)
            probs = predict_bayes(q, query, cfg.mc_predict, cfg.seed, cfg.scale)
        methods[method] = _evaluate_probs(probs, query.labels, protos.n_classes, cfg)
        methods[method]["trajectory_final"] = traj[-1] if traj else None

    report = {
        "schema": "protoadapt-compare-report/1",
        "config": cfg.to_dict(),
        "split": {
            "k": split.k,
            "seed": split.seed,
            "support_size": int(split.support_indices.size),
            "query_size": int(split.query_indices.size),
        },
        "methods": methods,
    }
    if cfg.format == "json":
        _write_json(out_dir / "compare-report.json", report)
    else:
        with open(out_dir / "compare-report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "metric", "level", "value"])
            for name in ("zeroshot", "map", "bayes"):
                for metric, level, value in _eval_rows(methods[name]):
                    w.writerow([name, metric, level, value])
    _print_compare_table(methods, cfg)
    return EXIT_OK


def _print_compare_table(methods: dict, cfg: RunConfig) -> None:
    level_hdr = "  ".join(f"cov@{100 * lv:.0f}%" for lv in cfg.levels)
    print(f"{'method':<10} {'acc%':>8} {'ece%':>8} {'aece%':>8}  {level_hdr}")
    for name in ("zeroshot", "map", "bayes"):
        m = methods[name]
        covs = "  ".join(
            (_pct(c["coverage"]) if c["reliable"] else f"x({_pct(c['coverage'])})")
            for c in m["coverage"]
        )
        print(
            f"{name:<10} {_pct(m['accuracy']):>8} {_pct(m['ece']):>8} "
            f"{_pct(m['aece']):>8}  {covs}"
        )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "train": cmd_train,
        "eval": cmd_eval,
        "compare": cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except ParamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProtoadaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
