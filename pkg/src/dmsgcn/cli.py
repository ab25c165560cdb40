"""``dmsgcn`` command line: train, eval, predict, gradcheck, render, graphs, ablate.

Every run-configuration key is also a flag (``--hidden_width 64`` or
``--hidden-width 64``); flags override ``--config`` files, which override
defaults.  Exit status: 0 success, 2 configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import model as model_mod
from .checks import run_suite
from .config import GROUPS, RunConfig, key_index, load_config, parse_pairs
from .data import (
    load_actions_manifest,
    load_csv,
    load_motion,
    select_joints,
    synth_windows,
    windows,
    write_csv,
)
from .errors import (
    CheckpointError,
    ConfigError,
    ConfigMismatchError,
    DataError,
    DimensionError,
    NumericalError,
    ValidationError,
)
from .metrics import HORIZONS_MS
from .model import DMSGCNModel, param_count
from .render import render_frames
from .skeleton import (
    SCALE_NAMES,
    export_matrix_csv,
    hierarchy_to_config_text,
    load_skeleton_config,
)
from .training import History, evaluate, predict, report_from_predictions, train, zero_velocity

log = logging.getLogger("dmsgcn")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

# synthetic splits draw from disjoint seed streams
_SPLIT_OFFSET = {"train": 0, "val": 1, "test": 2}

ABLATIONS = {
    "full": {},
    "1-scale": {"scales_enabled": 1},
    "2-scale": {"scales_enabled": 2},
    "no-mask": {"mask_enabled": False},
    "no-tgcn": {"tgcn_enabled": False},
}


# -- argument parsing -----------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value run configuration file")
    group = parser.add_argument_group("run configuration (mirrors config keys)")
    for key, (section, f) in key_index().items():
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        group.add_argument(*flags, dest=f"cfg_{key}", metavar=f.name.upper(),
                           help=f"[{section}] default {getattr(GROUPS[section](), key)!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmsgcn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoints and loss.csv")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="MPJPE table at the standard horizons")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--baseline", action="store_true", help="also report zero-velocity")
    _add_config_flags(p)

    p = sub.add_parser("predict", help="forecast the frames after an input CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_config_flags(p)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--skip-model", action="store_true", help="layers only")

    p = sub.add_parser("render", help="stick-figure SVG per frame of a pose CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", help="comma-separated 0-based frame indices (default all)")
    p.add_argument("--skeleton-config", dest="skeleton_file")

    p = sub.add_parser("graphs", help="export masks and pooling matrices as CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--skeleton-config", dest="skeleton_file")
    p.add_argument("--max-hops", default="2,2,2", help="joint,bone,part hop limits")

    p = sub.add_parser("ablate", help="train the variant set and compare")
    _add_config_flags(p)
    return parser


def _overrides(args) -> dict:
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}


def resolve_config(args) -> RunConfig:
    return load_config(getattr(args, "config", None), _overrides(args))


# -- data -----------------------------------------------------------------------

def _hierarchy(cfg: RunConfig):
    return load_skeleton_config(cfg.data.skeleton_config or None)


def load_split(cfg: RunConfig, split: str, hierarchy):
    """Windows for ``split`` from files when a path is configured, else synthetic."""
    d, m = cfg.data, cfg.model
    path = getattr(d, f"{split}_data")
    if path:
        actions = load_actions_manifest(d.actions_manifest) if d.actions_manifest else None
        seqs = load_motion(path, joint_indices=hierarchy.joint_indices, fps=d.fps,
                           actions=actions, center=d.center)
        stride = d.train_stride if split == "train" else d.test_stride
        out = [w for s in seqs for w in windows(s, m.T, m.K, stride)]
        if not out:
            raise DataError(f"{path}: no sequence is longer than T + K = {m.T + m.K} frames")
        return out
    n = getattr(d, f"synth_{split}_windows")
    if n <= 0:
        return []
    return synth_windows(n, d.synth_seed * 3 + _SPLIT_OFFSET[split], T=m.T, K=m.K,
                         V=hierarchy.skeletons[0].V)


# -- commands -------------------------------------------------------------------

def _prepare_out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    (out / "config.txt").write_text(cfg.dump())
    log.info("resolved configuration:\n%s", cfg.dump())
    return out


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    h = _hierarchy(cfg)
    train_set = load_split(cfg, "train", h)
    val_set = load_split(cfg, "val", h)
    out = _prepare_out_dir(cfg)
    model = DMSGCNModel(cfg.model, h)
    log.info("%d trainable parameters, %d training windows", param_count(model), len(train_set))
    history = History()

    def record(entry):
        history.epochs.append(entry)
        history.write_csv(out / "loss.csv")
        print(f"epoch {entry.epoch:4d}  lr {entry.lr:.3g}  train {entry.train_loss:.4f}"
              f"  val {entry.val_loss:.4f}", flush=True)

    train(model, train_set, val_set, cfg.train, checkpoint_dir=out / "checkpoints",
          on_epoch=record)
    history.write_csv(out / "loss.csv")
    model_mod.save(model, out / "checkpoint")
    print(f"checkpoint written to {out / 'checkpoint'}")
    return EXIT_OK


def _load_checkpoint(args, cfg: RunConfig):
    """Load ``--checkpoint``; any model keys given must agree with its snapshot."""
    given = dict(_overrides(args))
    if getattr(args, "config", None):
        given.update(parse_pairs(Path(args.config).read_text(), args.config))
    if any(key_index()[k][0] == "model" for k in given if k in key_index()):
        return model_mod.load(args.checkpoint, cfg.model, _hierarchy(cfg))
    return model_mod.load(args.checkpoint)


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    model = _load_checkpoint(args, cfg)
    cfg.model = model.config
    samples = load_split(cfg, "test", model.hierarchy)
    if not samples:
        raise DataError("no test windows: set test_data or synth_test_windows")
    out = _prepare_out_dir(cfg)
    report = evaluate(model, samples, fps=cfg.data.fps, horizons_ms=HORIZONS_MS)
    print(report.table())
    report.write_csv(out / "eval.csv")
    report.write_windows_csv(out / "eval_windows.csv")
    if args.baseline:
        base = report_from_predictions(zero_velocity(samples), samples, cfg.data.fps)
        print("\nzero-velocity baseline")
        print(base.table())
        base.write_csv(out / "eval_zero_velocity.csv")
    log.info("evaluated %d windows in %.2fs", len(samples), report.seconds)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    model = _load_checkpoint(args, cfg)
    h, T = model.hierarchy, model.config.T
    seq = load_csv(args.input, fps=cfg.data.fps)[0]
    if seq.V != h.skeletons[0].V:
        if seq.V != h.raw_joints:
            raise DimensionError(f"{args.input}: {seq.V} joints, expected {h.skeletons[0].V}"
                                 f" or {h.raw_joints}")
        seq = select_joints(seq, h.joint_indices)
    if seq.F < T:
        raise DataError(f"{args.input}: {seq.F} frames, need at least T = {T}")
    pred = predict(model, seq.frames[None, -T:])[0]
    write_csv(pred, args.output)
    print(f"wrote {pred.shape[0]} frames to {args.output}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_suite(include_model=not args.skip_model)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.ok]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} passed in {total:.1f}s")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_render(args) -> int:
    h = load_skeleton_config(args.skeleton_file)
    seq = load_csv(args.input)[0]
    skel = h.skeletons[0]
    if seq.V == h.raw_joints and seq.V != skel.V:
        seq = select_joints(seq, h.joint_indices)
    which = None
    if args.frames:
        try:
            which = [int(s) for s in args.frames.split(",")]
        except ValueError:
            raise ConfigError(f"--frames must be comma-separated integers: {args.frames!r}")
        bad = [f for f in which if not 0 <= f < seq.F]
        if bad:
            raise ConfigError(f"frames {bad} out of range for {seq.F} frames")
    paths = render_frames(seq.frames, skel, args.out_dir, which=which,
                          prefix=Path(args.input).stem)
    print(f"wrote {len(paths)} SVG files to {args.out_dir}")
    return EXIT_OK


def cmd_graphs(args) -> int:
    h = load_skeleton_config(args.skeleton_file)
    try:
        hops = [int(s) for s in args.max_hops.split(",")]
    except ValueError:
        raise ConfigError(f"--max-hops must be three integers: {args.max_hops!r}")
    if len(hops) != 3:
        raise ConfigError(f"--max-hops must be three integers: {args.max_hops!r}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, mask in zip(SCALE_NAMES, h.masks(hops)):
        export_matrix_csv(mask, out / f"mask_{name}.csv")
    export_matrix_csv(h.pool_ops[0], out / "pool_joint_to_bone.csv")
    export_matrix_csv(h.pool_ops[1], out / "pool_bone_to_part.csv")
    (out / "skeleton.cfg").write_text(hierarchy_to_config_text(h))
    print(f"wrote masks and pooling matrices to {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    h = _hierarchy(cfg)
    train_set = load_split(cfg, "train", h)
    test_set = load_split(cfg, "test", h)
    out = _prepare_out_dir(cfg)
    rows = []
    for name, change in ABLATIONS.items():
        variant = dataclasses.replace(cfg.model, **change)
        model = DMSGCNModel(variant, h)
        history = train(model, train_set, (), cfg.train)
        history.write_csv(out / f"loss_{name}.csv")
        err = (evaluate(model, test_set, fps=cfg.data.fps).average if test_set
               else np.full(len(HORIZONS_MS), np.nan))
        rows.append((name, param_count(model), history.train_losses[-1], err))
        print(f"{name:<8s} params {param_count(model):>8d}  final train loss "
              f"{history.train_losses[-1]:.4f}  " + " ".join(f"{e:7.2f}" for e in err), flush=True)
    with (out / "ablation.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "params", "final_train_loss"] + [f"{ms}ms" for ms in HORIZONS_MS])
        for name, n, loss, err in rows:
            w.writerow([name, n, repr(loss)] + [repr(float(e)) for e in err])
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "gradcheck": cmd_gradcheck,
    "render": cmd_render,
    "graphs": cmd_graphs,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = "INFO"
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(logging.WARNING)  # progress goes to stdout, details to run.log
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    try:
        threads = 1
        if args.command not in ("gradcheck", "render", "graphs"):
            cfg = resolve_config(args)
            threads, level = cfg.run.threads, cfg.run.log_level.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ConfigError(f"log_level must be debug, info, warning or error, got {level!r}")
        log.setLevel(level)
        with threadpool_limits(limits=threads):
            return COMMANDS[args.command](args)
    except (ConfigError, ConfigMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, DimensionError, ValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        for h in log.handlers[1:]:
            h.close()
        log.handlers[1:] = []


if __name__ == "__main__":
    sys.exit(main())
