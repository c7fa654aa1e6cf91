"""Single entry point: ingest, training, evaluation, prediction, and serving
as subcommands driven by a JSON config file.

Config precedence is flags > ``--set key=value`` overrides > config file >
built-in defaults.  Every artifact written embeds (or sits next to, for
fixed-schema files) a reproducibility stamp: the config hash, the seed, and
the corpus manifest hash.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
failure (training diverged).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluate as eval_mod
from . import model as model_mod
from . import prematch as prematch_mod
from .encode import EncodeError, FeatureLayout, build_vocabulary, encode_corpus
from .ingest import (
    DatasetSplit,
    FilterPolicy,
    IngestError,
    filter_corpus,
    load_corpus_dir,
    load_manifest,
    split_corpus,
    validate_match,
    write_manifest,
)
from .jsonio import canonical_dumps, sha256_of
from .model import Checkpoint, DivergedError, ModelConfig, ModelError, VariantKind

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class PathsConfig:
    corpus_dir: str = "corpus"
    manifest: str = "manifest.json"
    checkpoint_dir: str = "checkpoints"
    report_dir: str = "reports"


@dataclass
class EncodeConfig:
    team_min_count: int = 2
    team_cap: int = 200
    player_min_count: int = 5
    player_cap: int = 500
    venue_min_count: int = 2
    venue_cap: int = 100


@dataclass
class SplitConfig:
    ratio: float = 0.8
    seed: int = 7


@dataclass
class PrematchConfig:
    kind: str = "gbt"
    rounds: int = 60
    depth: int = 3
    lr: float = 0.1
    min_leaf: int = 2
    adaboost_rounds: int = 40
    model_path: str = ""


@dataclass
class ServeConfig:
    bind: str = "127.0.0.1:8000"
    idle_timeout_s: float = 21600.0


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    encode: EncodeConfig = field(default_factory=EncodeConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    model: ModelConfig = field(
        default_factory=lambda: ModelConfig(variant=VariantKind("per_ball"))
    )
    prematch: PrematchConfig = field(default_factory=PrematchConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)

    def to_dict(self) -> dict:
        return {
            "paths": dataclasses.asdict(self.paths),
            "encode": dataclasses.asdict(self.encode),
            "split": dataclasses.asdict(self.split),
            "model": self.model.to_dict(),
            "prematch": dataclasses.asdict(self.prematch),
            "serve": dataclasses.asdict(self.serve),
        }


def _apply_section(obj, section: str, values: dict):
    valid = {f.name for f in dataclasses.fields(obj)}
    for key, value in values.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {section}.{key}")
        setattr(obj, key, value)


def config_from_dict(doc: dict) -> RunConfig:
    cfg = RunConfig()
    known = {"paths", "encode", "split", "model", "prematch", "serve"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section in ("paths", "encode", "split", "prematch", "serve"):
        if section in doc:
            _apply_section(getattr(cfg, section), section, doc[section])
    if "model" in doc:
        merged = cfg.model.to_dict()
        unknown = set(doc["model"]) - set(merged)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted('model.' + k for k in unknown)}")
        merged.update(doc["model"])
        if isinstance(merged["variant"], str):
            merged["variant"] = {"kind": merged["variant"], "target_ball": None}
        cfg.model = ModelConfig.from_dict(merged)
    return cfg


def _parse_set_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object value")
        node[parts[-1]] = _parse_set_value(value)
    return doc


def load_config(args) -> RunConfig:
    doc: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    doc = apply_overrides(doc, args.set or [])
    cfg = config_from_dict(doc)
    if getattr(args, "seed", None) is not None:
        cfg.model.seed = args.seed
        cfg.split.seed = args.seed
    return cfg


def _stamp(cfg: RunConfig, seed: int, manifest_path=None) -> dict:
    stamp = {
        "config_sha256": sha256_of(cfg.to_dict()),
        "seed": seed,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if manifest_path and Path(manifest_path).exists():
        import hashlib

        stamp["manifest_sha256"] = hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest()
    return stamp


def _timestamped(directory: str, prefix: str, suffix: str) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{prefix}-{time.strftime('%Y%m%d-%H%M%S', time.gmtime())}{suffix}"


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


# --------------------------------------------------------------------------
# shared data plumbing
# --------------------------------------------------------------------------


def _split_matches(matches, split: DatasetSplit):
    by_id = {m.match_id: m for m in matches}
    train = [by_id[i] for i in split.train_ids if i in by_id]
    test = [by_id[i] for i in split.test_ids if i in by_id]
    return train, test


def _build_vocabs_and_layout(train_matches, enc: EncodeConfig):
    vocabs = {
        "team": build_vocabulary(train_matches, "team", enc.team_min_count, enc.team_cap),
        "player": build_vocabulary(train_matches, "player", enc.player_min_count, enc.player_cap),
    }
    layout = FeatureLayout.build(vocabs["team"].size, vocabs["player"].size)
    return vocabs, layout


def _prematch_probs_if_needed(cfg_model: ModelConfig, prematch_path: str, matches):
    if not cfg_model.aug_prematch:
        return None
    if not prematch_path:
        raise ConfigError("aug_prematch is on but no prematch model path is configured")
    model, tv, vv = prematch_mod.load_bundle(prematch_path)
    return prematch_mod.prematch_probabilities(matches, model, tv, vv)


def _encode_split(cfg: RunConfig, matches, split, prematch_path: str = ""):
    train_m, test_m = _split_matches(matches, split)
    if not train_m:
        raise IngestError("manifest has no training matches")
    vocabs, layout = _build_vocabs_and_layout(train_m, cfg.encode)
    probs = _prematch_probs_if_needed(cfg.model, prematch_path, train_m + test_m)
    kwargs = dict(
        vocabs=vocabs,
        layout=layout,
        innings_no=cfg.model.innings_no,
        enable_prematch=cfg.model.aug_prematch,
        enable_target=cfg.model.aug_target,
        enable_wickets=cfg.model.aug_wickets,
        prematch_probs=probs,
    )
    return train_m, test_m, vocabs, layout, encode_corpus(train_m, **kwargs), encode_corpus(
        test_m, **kwargs
    )


def _encode_for_checkpoint(ckpt: Checkpoint, matches, prematch_path: str = ""):
    probs = _prematch_probs_if_needed(ckpt.config, prematch_path, matches)
    return encode_corpus(
        matches,
        vocabs=ckpt.vocabularies,
        layout=ckpt.layout,
        innings_no=ckpt.config.innings_no,
        enable_prematch=ckpt.config.aug_prematch,
        enable_target=ckpt.config.aug_target,
        enable_wickets=ckpt.config.aug_wickets,
        prematch_probs=probs,
    )


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_ingest(args, cfg: RunConfig) -> int:
    corpus = args.corpus or cfg.paths.corpus_dir
    out = args.out or cfg.paths.manifest
    matches = load_corpus_dir(corpus)
    _say(args, f"parsed {len(matches)} matches from {corpus}")
    bad = 0
    for m in matches:
        violations = validate_match(m)
        if violations:
            bad += 1
            _say(args, f"{m.match_id}: {len(violations)} violations, e.g. {violations[0]}")
    policy = FilterPolicy(min_second_innings_deliveries=args.min_second_innings)
    kept = filter_corpus(matches, policy)
    _say(args, f"retained {len(kept)} matches after filtering ({bad} had violations)")
    ratio = args.ratio if args.ratio is not None else cfg.split.ratio
    seed = args.seed if args.seed is not None else cfg.split.seed
    split = split_corpus(kept, ratio, seed)
    write_manifest(out, kept, split, provenance=_stamp(cfg, seed))
    _say(args, f"wrote manifest with {len(split.train_ids)} train / {len(split.test_ids)} test")
    print(out)
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    manifest = args.manifest or cfg.paths.manifest
    matches, split = load_manifest(manifest)
    train_m, test_m, vocabs, layout, train_seqs, test_seqs = _encode_split(
        cfg, matches, split, args.prematch_model or cfg.prematch.model_path
    )
    _say(args, f"training on {len(train_seqs)} innings, testing on {len(test_seqs)}")
    log = None if args.quiet else (
        lambda e: print(
            f"epoch {e['epoch']:3d} loss {e['train_loss']:.4f} "
            f"train_acc {e['train_accuracy']:.3f} test_acc {e['test_accuracy']}",
            file=sys.stderr,
        )
    )
    ckpt = model_mod.train(train_seqs, test_seqs, cfg.model, layout, vocabs, log=log)
    ckpt.provenance = _stamp(cfg, cfg.model.seed, manifest)
    out = args.out or str(_timestamped(cfg.paths.checkpoint_dir, "checkpoint", ".json"))
    model_mod.save_checkpoint(ckpt, out)
    print(out)
    return 0


def cmd_prematch(args, cfg: RunConfig) -> int:
    manifest = args.manifest or cfg.paths.manifest
    matches, split = load_manifest(manifest)
    train_m, test_m = _split_matches(matches, split)
    if not train_m:
        raise IngestError("manifest has no training matches")
    tv, vv = prematch_mod.build_prematch_vocabs(train_m)
    X, y = prematch_mod.build_dataset(train_m, tv, vv)
    kind = args.kind or cfg.prematch.kind
    if kind == "adaboost":
        model = prematch_mod.train_adaboost(X, y, cfg.prematch.adaboost_rounds)
    else:
        model = prematch_mod.train_gbt(
            X, y, prematch_mod.GbtConfig(
                rounds=cfg.prematch.rounds, depth=cfg.prematch.depth,
                lr=cfg.prematch.lr, min_leaf=cfg.prematch.min_leaf,
            ),
        )
    for name, subset in (("train", train_m), ("test", test_m)):
        if not subset:
            continue
        Xs, ys = prematch_mod.build_dataset(subset, tv, vv)
        preds = (model.score(Xs) >= 0.0).astype(int)
        _say(args, f"prematch {kind} {name} accuracy: {float((preds == ys).mean()):.3f}")
    out = args.out or str(_timestamped(cfg.paths.checkpoint_dir, f"prematch-{kind}", ".json"))
    prematch_mod.save_bundle(out, model, tv, vv, provenance=_stamp(cfg, cfg.model.seed, manifest))
    print(out)
    return 0


def _load_eval_inputs(args, cfg: RunConfig):
    manifest = args.manifest or cfg.paths.manifest
    ckpt = model_mod.load_checkpoint(args.checkpoint)
    if ckpt.layout.layout_version != cfg.model.layout_version:
        raise model_mod.VersionMismatch(
            f"checkpoint layout_version {ckpt.layout.layout_version} != configured "
            f"{cfg.model.layout_version}"
        )
    matches, split = load_manifest(manifest)
    train_m, test_m = _split_matches(matches, split)
    prematch_path = args.prematch_model or cfg.prematch.model_path
    train_seqs = _encode_for_checkpoint(ckpt, train_m, prematch_path) if train_m else []
    test_seqs = _encode_for_checkpoint(ckpt, test_m, prematch_path) if test_m else []
    return ckpt, manifest, train_seqs, test_seqs


def _write_report(args, cfg: RunConfig, report, manifest, prefix: str) -> int:
    doc = report.to_dict()
    doc["provenance"] = _stamp(cfg, cfg.model.seed, manifest)
    if args.out:
        base = Path(args.out)
    else:
        base = _timestamped(cfg.paths.report_dir, prefix, "")
    json_path = base.with_suffix(".json")
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    base.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    print(json_path)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    ckpt, manifest, train_seqs, test_seqs = _load_eval_inputs(args, cfg)
    report = eval_mod.accuracy_curve(
        ckpt, test_seqs, [args.at_ball], train_seqs=train_seqs,
        checkpoint_id=args.checkpoint, dataset_id=manifest,
    )
    return _write_report(args, cfg, report, manifest, "eval")


def cmd_curve(args, cfg: RunConfig) -> int:
    at_balls = [int(x) for x in args.at_balls.split(",")]
    ckpt, manifest, train_seqs, test_seqs = _load_eval_inputs(args, cfg)
    report = eval_mod.accuracy_curve(
        ckpt, test_seqs, at_balls, train_seqs=train_seqs,
        checkpoint_id=args.checkpoint, dataset_id=manifest,
    )
    return _write_report(args, cfg, report, manifest, "curve")


def cmd_compare(args, cfg: RunConfig) -> int:
    manifest = args.manifest or cfg.paths.manifest
    matches, split = load_manifest(manifest)
    train_m, test_m, vocabs, layout, train_seqs, test_seqs = _encode_split(
        cfg, matches, split, args.prematch_model or cfg.prematch.model_path
    )
    at_balls = tuple(int(x) for x in args.at_balls.split(","))
    kinds = tuple(args.kinds.split(","))
    rows = eval_mod.compare_variants(
        cfg.model, train_seqs, test_seqs, layout, vocabs, at_balls=at_balls, kinds=kinds
    )
    doc = {
        "rows": [
            {"variant": r["variant"],
             "test_accuracy": {str(k): v for k, v in r["test_accuracy"].items()}}
            for r in rows
        ],
        "provenance": _stamp(cfg, cfg.model.seed, manifest),
    }
    out = Path(args.out) if args.out else _timestamped(cfg.paths.report_dir, "compare", ".json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    print(out)
    return 0


def cmd_ablate(args, cfg: RunConfig) -> int:
    manifest = args.manifest or cfg.paths.manifest
    matches, split = load_manifest(manifest)
    train_m, test_m = _split_matches(matches, split)
    if not train_m:
        raise IngestError("manifest has no training matches")
    vocabs, layout = _build_vocabs_and_layout(train_m, cfg.encode)
    prematch_path = args.prematch_model or cfg.prematch.model_path
    if not prematch_path:
        raise ConfigError("ablate needs a trained pre-match model (--prematch-model)")
    bundle = prematch_mod.load_bundle(prematch_path)
    at_balls = tuple(int(x) for x in args.at_balls.split(","))
    rows = eval_mod.ablation(
        cfg.model, train_m, test_m, vocabs, layout, prematch_model=bundle, at_balls=at_balls
    )
    doc = {
        "rows": [
            {"stage": r["stage"], "flags": r["flags"],
             "test_accuracy": {str(k): v for k, v in r["test_accuracy"].items()}}
            for r in rows
        ],
        "provenance": _stamp(cfg, cfg.model.seed, manifest),
    }
    out = Path(args.out) if args.out else _timestamped(cfg.paths.report_dir, "ablation", ".json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    print(out)
    return 0


def cmd_predict(args, cfg: RunConfig) -> int:
    ckpt = model_mod.load_checkpoint(args.checkpoint)
    matches, _split = load_manifest(args.manifest or cfg.paths.manifest)
    wanted = [m for m in matches if m.match_id == args.match_id]
    if not wanted:
        raise IngestError(f"match {args.match_id!r} not in manifest")
    seqs = _encode_for_checkpoint(ckpt, wanted, args.prematch_model or cfg.prematch.model_path)
    p = model_mod.predict_at_ball(ckpt, seqs[0], args.at_ball)
    print(canonical_dumps({
        "match_id": args.match_id,
        "at_ball": args.at_ball,
        "p_win": p,
        "provenance": _stamp(cfg, cfg.model.seed, args.manifest or cfg.paths.manifest),
    }))
    return 0


def cmd_serve(args, cfg: RunConfig) -> int:
    from .serve import run_server

    bind = args.bind or cfg.serve.bind
    host, _, port = bind.partition(":")
    run_server(
        args.checkpoint_dir or cfg.paths.checkpoint_dir,
        host=host or "127.0.0.1",
        port=int(port or 8000),
        idle_timeout_s=cfg.serve.idle_timeout_s,
    )
    return 0


# --------------------------------------------------------------------------
# argument wiring
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # the common flags are accepted both before and after the subcommand;
    # SUPPRESS defaults keep the subparser from clobbering earlier values
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS,
                        metavar="KEY=VALUE", help="override a config value (repeatable)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override model and split seeds")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="crickwin", description="ball-by-ball win-probability pipeline",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command")

    def sub_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = sub_parser("ingest", help="parse a corpus directory into a manifest")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--ratio", type=float)
    p.add_argument("--min-second-innings", type=int, default=6)
    p.set_defaults(fn=cmd_ingest)

    p = sub_parser("train", help="train a sequence model")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--prematch-model")
    p.set_defaults(fn=cmd_train)

    p = sub_parser("prematch", help="train a pre-match boosted classifier")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--kind", choices=("gbt", "adaboost"))
    p.set_defaults(fn=cmd_prematch)

    p = sub_parser("eval", help="accuracy after one ball")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--at-ball", type=int, required=True)
    p.add_argument("--prematch-model")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub_parser("curve", help="accuracy after several balls")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--at-balls", default="6,30,60,90,120,180,240,300")
    p.add_argument("--prematch-model")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_curve)

    p = sub_parser("compare", help="train and compare model variants")
    p.add_argument("--manifest")
    p.add_argument("--at-balls", default="200,250,300")
    p.add_argument("--kinds", default="single_output,per_ball,sampled_prefix,cumulative")
    p.add_argument("--prematch-model")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compare)

    p = sub_parser("ablate", help="cumulative augmentation ablation")
    p.add_argument("--manifest")
    p.add_argument("--at-balls", default="200,250,300")
    p.add_argument("--prematch-model")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ablate)

    p = sub_parser("predict", help="win probability for one match")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--match-id", required=True)
    p.add_argument("--at-ball", type=int, required=True)
    p.add_argument("--prematch-model")
    p.set_defaults(fn=cmd_predict)

    p = sub_parser("serve", help="run the live inference API")
    p.add_argument("--checkpoint-dir")
    p.add_argument("--bind")
    p.set_defaults(fn=cmd_serve)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help; map usage failures to exit 1
        return 0 if exc.code == 0 else USAGE_ERROR
    # the common flags use SUPPRESS defaults (shared between main parser and
    # subparsers); fill in whatever was never given
    for name, default in (("config", None), ("set", None), ("seed", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        cfg = load_config(args)
        return args.fn(args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DivergedError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (IngestError, EncodeError, ModelError, prematch_mod.PrematchError,
            eval_mod.EmptyDataset, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
