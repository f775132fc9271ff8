"""Command line: synth, train, predict, score, plot.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import skeleton as sk
from . import svg
from .models import discriminator_prob, generate, sample_z
from .trainer import (
    CheckpointError,
    ConfigError,
    TrainingConfig,
    apply_overrides,
    load_checkpoint,
    parse_config_text,
    read_losses_csv,
    save_checkpoint,
    train,
    write_losses_csv,
    write_quality_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("hpgan")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hpgan", description="Probabilistic human motion prediction with a GAN.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write synthetic motion as canonical JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--sequences", type=_positive, default=200)
    s.add_argument("--frames", type=_positive, default=40)
    s.add_argument("--joints", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train on a directory of sequences")
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="flat key = value file")
    t.add_argument("--out", default="run")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("overrides", nargs="*", metavar="key=value")

    pr = sub.add_parser("predict", help="sample several futures for one input")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--num-futures", type=_positive, default=5)
    pr.add_argument("--frames", type=_positive)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", default="predictions")

    sc = sub.add_parser("score", help="discriminator probability that a sequence is real")
    sc.add_argument("--checkpoint", required=True)
    sc.add_argument("--input", required=True)

    pl = sub.add_parser("plot", help="SVG chart of losses.csv")
    pl.add_argument("--losses", required=True)
    pl.add_argument("--out", required=True)
    return p


# ------------------------------------------------------------------ commands


def cmd_synth(args) -> int:
    if args.joints < 2:
        raise UsageError("--joints must be >= 2 (a skeleton needs at least one bone)")
    seqs = sk.synth_generate(sequences=args.sequences, frames=args.frames,
                             topology_size=args.joints, seed=args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i, seq in enumerate(seqs):
            (out / f"seq_{i:04d}.json").write_text(sk.serialize_canonical_json(seq))
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    print(f"wrote {len(seqs)} sequences to {out}")
    return EXIT_OK


def load_config(args) -> TrainingConfig:
    cfg = TrainingConfig()
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from None
        values.update(parse_config_text(text))
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if args.epochs is not None:
        values["epochs"] = str(args.epochs)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return apply_overrides(cfg, values)


def prepare_samples(seqs, cfg: TrainingConfig):
    if not seqs:
        raise DataError("no sequences found")
    topo = seqs[0].topology
    for s in seqs:
        if s.topology.joints != topo.joints or s.topology.bones != topo.bones:
            raise DataError(f"{s.source}: topology differs from {seqs[0].source}")
    bounds = sk.NTU_BOUNDS if cfg.bounds == "ntu" else sk.bounds_from_data(seqs)
    samples = []
    for s in seqs:
        samples.extend(sk.window_samples(s, cfg.m, cfg.n, cfg.stride, cfg.frame_step, bounds))
    if not samples:
        raise DataError(f"no sequence is long enough for m + n = {cfg.m + cfg.n} frames")
    return samples, topo, bounds


def cmd_train(args) -> int:
    cfg = load_config(args)
    data = Path(args.data)
    if not data.exists():
        raise DataError(f"data path {data} does not exist")
    seqs = sk.load_sequences(data)
    samples, topo, bounds = prepare_samples(seqs, cfg)
    log.info("training on %d samples (%d sequences)", len(samples), len(seqs))
    result = train(samples, cfg, topo, bounds)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(result.best, out / "best.json")
        save_checkpoint(result.final, out / "final.json")
        write_losses_csv(result.history, out / "losses.csv")
        write_quality_csv(result.quality, out / "quality.csv")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    best_q = result.best.quality or {}
    print(f"best epoch {result.best.epoch}: {best_q.get('count_above_half')} of {cfg.quality_N} "
          f"predictions above 0.5; artifacts in {out}")
    return EXIT_OK


def _load_model(path):
    ckpt = load_checkpoint(path)
    model = ckpt.restore()
    cfg = ckpt.training_config
    norm = (sk.NormalizationParams.from_dict(ckpt.normalization) if ckpt.normalization
            else sk.NormalizationParams((-1.0,) * 3, (1.0,) * 3))
    return model, cfg, norm


def _read_input(path, model):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    seq = sk.parse_canonical_json(text, source=Path(path).name)
    if seq.topology.joints != model.topology.joints or seq.topology.bones != model.topology.bones:
        raise DataError(f"{path}: topology does not match the checkpoint")
    return seq


def cmd_predict(args) -> int:
    model, cfg, norm = _load_model(args.checkpoint)
    seq = _read_input(args.input, model)
    if len(seq) < cfg.m:
        raise DataError(f"input has {len(seq)} frames, need at least m = {cfg.m}")
    n = args.frames or cfg.n
    raw_prior = seq.frames[: cfg.m]
    prior, used = sk.normalize_frames(raw_prior, norm, prior_frames=cfg.m)
    rng = np.random.default_rng(args.seed)
    z = sample_z(rng, args.num_futures, cfg.z_dim, cfg.z_distribution)
    with ad.no_grad():
        fut = generate(model.gen, prior, z, n).data
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(args.num_futures):
            raw = sk.denormalize_frames(fut[i], used)
            res = sk.SkeletonSequence(model.topology, raw, seq.frame_step, f"future_{i:02d}")
            (out / f"future_{i:02d}.json").write_text(sk.serialize_canonical_json(res))
            (out / f"future_{i:02d}.svg").write_text(
                svg.stick_figure_strip(raw_prior, raw, model.topology, title=f"z draw {i}")
            )
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    print(f"wrote {args.num_futures} predictions of {n} frames to {out}")
    return EXIT_OK


def cmd_score(args) -> int:
    model, cfg, norm = _load_model(args.checkpoint)
    seq = _read_input(args.input, model)
    if len(seq) != cfg.m + cfg.n:
        raise DataError(f"input has {len(seq)} frames, expected m + n = {cfg.m + cfg.n}")
    frames, _ = sk.normalize_frames(seq.frames, norm, prior_frames=cfg.m)
    with ad.no_grad():
        p = discriminator_prob(model.disc, frames[: cfg.m], frames[cfg.m:]).item()
    print(repr(float(p)))
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        rows = read_losses_csv(args.losses)
    except OSError as exc:
        raise DataError(f"cannot read {args.losses}: {exc}") from None
    cols = ("step", "critic_loss", "generator_loss", "discriminator_loss")
    if not rows:
        raise DataError(f"{args.losses} has no data rows")
    missing = [c for c in cols if c not in rows[0]]
    if missing:
        raise DataError(f"{args.losses} is missing columns {missing}")
    try:
        steps = [float(r["step"]) for r in rows]
        series = {name: [float(r[f"{name}_loss"]) for r in rows]
                  for name in ("critic", "generator", "discriminator")}
    except (TypeError, ValueError) as exc:
        raise DataError(f"{args.losses}: bad value: {exc}") from None
    try:
        Path(args.out).write_text(svg.loss_chart(steps, series))
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "predict": cmd_predict,
            "score": cmd_score, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"hpgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"hpgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ad.NonFiniteError as exc:
        print(f"hpgan: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, sk.SkeletonError, CheckpointError, ad.ShapeError, FileNotFoundError) as exc:
        print(f"hpgan: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
