"""Alternating critic / generator / discriminator training."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from . import autodiff as ad
from .autodiff import NonFiniteError, Tensor
from .losses import (
    Batch,
    LossWeights,
    critic_total_loss,
    discriminator_total_loss,
    generator_total_loss,
)
from .models import MLP, Generator, discriminator_prob, generate, sample_z
from .skeleton import NormalizationParams, SkeletonTopology

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hpgan-checkpoint"
CHECKPOINT_VERSION = 1

PRESETS = {
    "desk": {"hidden_dim": 64, "critic_hidden": (128, 64)},
    "full": {"hidden_dim": 1024, "critic_hidden": (1024, 512)},
}


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainingConfig:
    m: int = 10
    n: int = 30
    z_dim: int = 128
    k_critic: int = 10
    lr_critic: float = 5e-5
    lr_generator: float = 5e-5
    lr_discriminator: float = 2.5e-5
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    adam_eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 10
    warmup_fraction: float = 0.25
    quality_N: int = 64
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    preset: str = "desk"
    hidden_dim: int | None = None
    num_layers: int = 2
    critic_hidden: tuple | None = None
    z_distribution: str = "uniform"
    stride: int = 1
    frame_step: int = 1
    bounds: str = "data"

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.hidden_dim is None:
            self.hidden_dim = PRESETS[self.preset]["hidden_dim"]
        if self.critic_hidden is None:
            self.critic_hidden = PRESETS[self.preset]["critic_hidden"]
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        if min(self.lr_critic, self.lr_generator, self.lr_discriminator) <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.k_critic < 1:
            raise ConfigError("k_critic must be >= 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.m < 1 or self.n < 1:
            raise ConfigError("m and n must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1 or self.quality_N < 1:
            raise ConfigError("batch_size and quality_N must be >= 1")
        if self.z_distribution not in ("uniform", "normal"):
            raise ConfigError(f"z_distribution must be 'uniform' or 'normal', got {self.z_distribution!r}")
        if self.bounds not in ("data", "ntu"):
            raise ConfigError(f"bounds must be 'data' or 'ntu', got {self.bounds!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if isinstance(d.get("weights"), dict):
            wknown = {f.name for f in dataclasses.fields(LossWeights)}
            bad = set(d["weights"]) - wknown
            if bad:
                raise ConfigError(f"unknown config keys: {sorted('weights.' + b for b in bad)}")
        return cls(**d)


def _coerce(key: str, raw, current):
    """Type-check an override string against the field's current value."""
    if isinstance(raw, str):
        text = raw.strip()
    else:
        return raw
    try:
        if isinstance(current, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(int(v) for v in text.strip("()[]").split(",") if v.strip())
        if current is None:
            try:
                return int(text)
            except ValueError:
                return tuple(int(v) for v in text.strip("()[]").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(current).__name__}") from None
    return text


def apply_overrides(cfg: TrainingConfig, overrides: dict) -> TrainingConfig:
    """Return a new config with dotted ``key=value`` overrides applied."""
    d = cfg.to_dict()
    for key, raw in overrides.items():
        parts = key.split(".")
        if len(parts) == 1:
            if parts[0] not in d or parts[0] == "weights":
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(cfg, parts[0])
            d[parts[0]] = _coerce(key, raw, current)
        elif len(parts) == 2 and parts[0] == "weights":
            if parts[1] not in d["weights"]:
                raise ConfigError(f"unknown config key {key!r}")
            d["weights"][parts[1]] = _coerce(key, raw, float(d["weights"][parts[1]]))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return TrainingConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ------------------------------------------------------------------ Adam


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.5, beta2: float = 0.9, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update. Replaces each ``param.data`` with a new array."""
    ad.assert_finite_grads(grads)
    state.step += 1
    k = _kernels.active
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ad.ShapeError(f"adam: gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        p.data = k.adam_update(p.data, g, state.m[name], state.v[name], lr, beta1, beta2, eps, state.step)


# ------------------------------------------------------------------ model bundle


@dataclass
class HPGAN:
    gen: Generator
    critic: MLP
    disc: MLP
    topology: SkeletonTopology
    opt_gen: AdamState = field(default_factory=AdamState)
    opt_critic: AdamState = field(default_factory=AdamState)
    opt_disc: AdamState = field(default_factory=AdamState)

    @classmethod
    def init(cls, cfg: TrainingConfig, topology: SkeletonTopology, rng) -> "HPGAN":
        J = topology.joints
        in_dim = (cfg.m + cfg.n) * J * 3
        gen = Generator.init(rng, J, cfg.hidden_dim, cfg.num_layers, cfg.z_dim)
        critic = MLP.init(rng, in_dim, cfg.critic_hidden, prefix="critic")
        disc = MLP.init(rng, in_dim, cfg.critic_hidden, sigmoid_output=True, prefix="disc")
        return cls(gen, critic, disc, topology)

    def params(self) -> dict:
        return {**self.gen.params(), **self.critic.params(), **self.disc.params()}


def _finite(loss: Tensor, what: str, step: int):
    if not loss.is_finite():
        bad = ad.first_nonfinite(loss)
        label = (bad.name or bad.op) if bad is not None else "?"
        raise NonFiniteError(f"step {step}: non-finite {what} loss (first offending node {label!r})")


def _check_grads(grads: dict, what: str, step: int):
    try:
        ad.assert_finite_grads(grads)
    except NonFiniteError as exc:
        raise NonFiniteError(f"step {step}: {what}: {exc}") from None


def critic_phase(batch: Batch, model: HPGAN, cfg: TrainingConfig, rng, step: int = 0) -> list:
    """k_critic Adam updates of the critic; fresh z and eps every iteration."""
    trace = []
    params = model.critic.params()
    frozen_gen = model.gen.frozen()
    for _ in range(cfg.k_critic):
        z = sample_z(rng, batch.size, cfg.z_dim, cfg.z_distribution)
        eps = rng.uniform(0.0, 1.0, batch.size)
        with ad.no_grad():
            fake = generate(frozen_gen, batch.prior, z, cfg.n).data
        loss = critic_total_loss(model.critic, frozen_gen, batch, z, eps, cfg.weights, future_fake=fake)
        _finite(loss, "critic", step)
        grads = ad.backward(loss, params)
        _check_grads(grads, "critic", step)
        adam_step(params, grads, model.opt_critic, cfg.lr_critic, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        trace.append(loss.item())
    return trace


def generator_phase(batch: Batch, model: HPGAN, cfg: TrainingConfig, rng, step: int = 0) -> float:
    z = sample_z(rng, batch.size, cfg.z_dim, cfg.z_distribution)
    params = model.gen.params()
    loss = generator_total_loss(model.gen, model.critic, batch, z, cfg.weights, model.topology)
    _finite(loss, "generator", step)
    grads = ad.backward(loss, params)
    _check_grads(grads, "generator", step)
    adam_step(params, grads, model.opt_gen, cfg.lr_generator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return loss.item()


def discriminator_phase(batch: Batch, model: HPGAN, cfg: TrainingConfig, rng, step: int = 0) -> float:
    z = sample_z(rng, batch.size, cfg.z_dim, cfg.z_distribution)
    params = model.disc.params()
    loss = discriminator_total_loss(model.disc, model.gen, batch, z, cfg.weights)
    _finite(loss, "discriminator", step)
    grads = ad.backward(loss, params)
    _check_grads(grads, "discriminator", step)
    adam_step(params, grads, model.opt_disc, cfg.lr_discriminator, cfg.adam_beta1, cfg.adam_beta2,
              cfg.adam_eps)
    return loss.item()


# ------------------------------------------------------------------ quality


@dataclass
class QualityReport:
    epoch: int
    count_above_half: int
    mean_prob: float
    probs: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        return cls(int(d["epoch"]), int(d["count_above_half"]), float(d["mean_prob"]), list(d["probs"]))


def quality_evaluate(gen: Generator, disc: MLP, prior, N: int, n: int, rng, z_dim: int | None = None,
                     distribution: str = "uniform", epoch: int = 0):
    """Score N z-draws from one prior; count probabilities strictly above 0.5.

    Returns (report, predicted futures of shape (N, n, J, 3)).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    z = sample_z(rng, N, z_dim or gen.z_dim, distribution)
    prior = np.asarray(prior, dtype=np.float64)
    with ad.no_grad():
        fut = generate(gen, prior, z, n)
        probs = discriminator_prob(disc, prior, fut).data.reshape(-1)
    report = QualityReport(epoch, int(np.sum(probs > 0.5)), float(probs.mean()), [float(p) for p in probs])
    return report, fut.data


# ------------------------------------------------------------------ checkpoints


@dataclass
class Checkpoint:
    tensors: dict
    adam: dict
    config: dict
    topology: dict
    epoch: int
    quality: dict | None = None
    normalization: dict | None = None

    @classmethod
    def capture(cls, model: HPGAN, cfg: TrainingConfig, epoch: int, quality: QualityReport | None = None,
                normalization: NormalizationParams | None = None) -> "Checkpoint":
        tensors = {k: t.data.copy() for k, t in model.params().items()}
        adam = {}
        for key, st in (("gen", model.opt_gen), ("critic", model.opt_critic), ("disc", model.opt_disc)):
            adam[key] = {"step": st.step,
                         "m": {k: v.copy() for k, v in st.m.items()},
                         "v": {k: v.copy() for k, v in st.v.items()}}
        return cls(tensors, adam, cfg.to_dict(), model.topology.to_dict(), epoch,
                   quality.to_dict() if quality else None,
                   normalization.to_dict() if normalization else None)

    @property
    def training_config(self) -> TrainingConfig:
        return TrainingConfig.from_dict(self.config)

    def restore(self) -> HPGAN:
        """Rebuild the networks (and optimizer state) stored in this checkpoint."""
        cfg = self.training_config
        topo = SkeletonTopology.from_dict(self.topology)
        model = HPGAN.init(cfg, topo, np.random.default_rng(0))
        params = model.params()
        missing = set(params) ^ set(self.tensors)
        if missing:
            raise CheckpointError(f"checkpoint tensors do not match the model: {sorted(missing)[:5]}")
        for k, p in params.items():
            arr = np.asarray(self.tensors[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise CheckpointError(f"tensor {k}: shape {arr.shape} != expected {p.shape}")
            p.data = arr.copy()
        for key, st in (("gen", model.opt_gen), ("critic", model.opt_critic), ("disc", model.opt_disc)):
            a = self.adam.get(key, {})
            st.step = int(a.get("step", 0))
            st.m = {k: np.asarray(v, dtype=np.float64).copy() for k, v in a.get("m", {}).items()}
            st.v = {k: np.asarray(v, dtype=np.float64).copy() for k, v in a.get("v", {}).items()}
        return model


def _enc(arr) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}


def _dec(d) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in d["shape"])
        vals = np.array(d["values"], dtype=np.float64)
        return vals.reshape(shape)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt tensor entry: {exc}") from None


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write a JSON checkpoint. Float values round-trip bit-exactly."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "epoch": ckpt.epoch,
        "config": ckpt.config,
        "topology": ckpt.topology,
        "normalization": ckpt.normalization,
        "quality": ckpt.quality,
        "tensors": {k: _enc(v) for k, v in ckpt.tensors.items()},
        "adam": {
            net: {"step": a["step"],
                  "m": {k: _enc(v) for k, v in a["m"].items()},
                  "v": {k: _enc(v) for k, v in a["v"].items()}}
            for net, a in ckpt.adam.items()
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an hpgan checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')!r} unsupported "
                              f"(expected {CHECKPOINT_VERSION})")
    try:
        tensors = {k: _dec(v) for k, v in doc["tensors"].items()}
        adam = {
            net: {"step": int(a["step"]),
                  "m": {k: _dec(v) for k, v in a["m"].items()},
                  "v": {k: _dec(v) for k, v in a["v"].items()}}
            for net, a in doc["adam"].items()
        }
        return Checkpoint(tensors, adam, doc["config"], doc["topology"], int(doc["epoch"]),
                          doc.get("quality"), doc.get("normalization"))
    except (KeyError, TypeError, AttributeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: missing {exc}") from None


# ------------------------------------------------------------------ training loop


@dataclass
class TrainResult:
    best: Checkpoint
    final: Checkpoint
    history: list  # (step, critic, generator, discriminator)
    quality: list  # QualityReport per epoch
    model: HPGAN
    probe_index: int = 0  # sample scored by quality_evaluate each epoch


def iterate_batches(samples: list, batch_size: int, rng):
    order = rng.permutation(len(samples))
    for lo in range(0, len(samples), batch_size):
        yield [samples[i] for i in order[lo:lo + batch_size]]


def train(samples: list, cfg: TrainingConfig, topology: SkeletonTopology,
          normalization: NormalizationParams | None = None,
          on_epoch: Callable | None = None, max_steps: int | None = None) -> TrainResult:
    """Run adversarial training over normalized ``samples``.

    Each batch: k critic updates, then one generator and one discriminator
    update. After every epoch the probe prior is scored; once past the
    warm-up fraction, the checkpoint with the highest count is retained.
    """
    if not samples:
        raise ValueError("empty dataset")
    for s in samples[:1]:
        if s.prior.shape[0] != cfg.m or s.future.shape[0] != cfg.n:
            raise ConfigError(f"samples have {s.prior.shape[0]}+{s.future.shape[0]} frames, "
                              f"config expects {cfg.m}+{cfg.n}")
    rng = np.random.default_rng(cfg.seed)
    model = HPGAN.init(cfg, topology, rng)
    probe_index = int(rng.integers(len(samples)))
    probe = samples[probe_index]
    track_from = math.floor(cfg.warmup_fraction * cfg.epochs)
    history, reports = [], []
    best = None
    best_count = -1
    step = 0
    for epoch in range(cfg.epochs):
        for chunk in iterate_batches(samples, cfg.batch_size, rng):
            batch = Batch.from_samples(chunk, topology)
            c = critic_phase(batch, model, cfg, rng, step)
            g = generator_phase(batch, model, cfg, rng, step)
            d = discriminator_phase(batch, model, cfg, rng, step)
            history.append((step, c[-1], g, d))
            step += 1
            if max_steps is not None and step >= max_steps:
                break
        report, _ = quality_evaluate(model.gen, model.disc, probe.prior, cfg.quality_N, cfg.n,
                                     np.random.default_rng([cfg.seed, epoch]), cfg.z_dim,
                                     cfg.z_distribution, epoch)
        reports.append(report)
        log.info("epoch %d: step %d critic %.4f gen %.4f disc %.4f quality %d/%d",
                 epoch, step, *history[-1][1:], report.count_above_half, cfg.quality_N)
        if epoch >= track_from and report.count_above_half > best_count:
            best_count = report.count_above_half
            best = Checkpoint.capture(model, cfg, epoch, report, normalization)
        if on_epoch is not None:
            on_epoch(epoch, model, report)
        if max_steps is not None and step >= max_steps:
            break
    final = Checkpoint.capture(model, cfg, epoch, reports[-1], normalization)
    if best is None:
        best = final
    return TrainResult(best, final, history, reports, model, probe_index)


def write_losses_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "critic_loss", "generator_loss", "discriminator_loss"])
        for step, c, g, d in history:
            w.writerow([step, repr(float(c)), repr(float(g)), repr(float(d))])


def read_losses_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def write_quality_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "count_above_half", "mean_prob"])
        for r in reports:
            w.writerow([r.epoch, r.count_above_half, repr(r.mean_prob)])
