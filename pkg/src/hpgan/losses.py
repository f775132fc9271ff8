"""Critic, generator and discriminator objectives.

Batched losses reduce with the arithmetic mean over the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .models import MLP, Generator, critic_score, discriminator_prob, flatten_sequence, generate
from .skeleton import SkeletonTopology, bone_lengths

PROB_CLAMP = 1e-7


@dataclass
class LossWeights:
    lambda_gp: float = 10.0
    alpha_l2: float = 0.001
    alpha_pg: float = 0.01
    beta_bone: float = 0.01
    pg_floor_C: float = 0.01
    p: float = 2.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"loss weight {k} must be >= 0, got {v}")
        if self.p < 1:
            raise ValueError(f"norm order p must be >= 1, got {self.p}")


@dataclass
class Batch:
    """Stacked training samples: prior (B, m, J, 3), future (B, n, J, 3) and
    ground-truth bone lengths (B, J-1) measured on the real frames."""

    prior: np.ndarray
    future: np.ndarray
    bones: np.ndarray

    @property
    def size(self) -> int:
        return self.prior.shape[0]

    @classmethod
    def from_samples(cls, samples, topology: SkeletonTopology) -> "Batch":
        prior = np.stack([s.prior for s in samples])
        future = np.stack([s.future for s in samples])
        real = np.concatenate([prior, future], axis=1)
        # one length per bone, averaged over the sample's real frames
        bones = bone_lengths(real, topology).mean(axis=1)
        return cls(prior, future, bones)


def wgan_critic_term(score_fake, score_real) -> Tensor:
    """D(x || G(x, z)) - D(x || y), batch-averaged."""
    return ad.mean(ad.sub(score_fake, score_real))


def gradient_penalty(critic: MLP, prior, future_real, future_fake, eps) -> Tensor:
    """Mean over the batch of (||grad_xhat D(xhat)||_2 - 1)^2 where xhat
    interpolates real and fake sequences with weight ``eps`` on the real one."""
    real = flatten_sequence(prior, future_real).data
    fake_t = future_fake.detach() if isinstance(future_fake, Tensor) else future_fake
    fake = flatten_sequence(prior, fake_t).data
    if real.shape != fake.shape:
        raise ad.ShapeError(f"gradient_penalty: real {real.shape} vs fake {fake.shape}")
    e = np.asarray(eps, dtype=np.float64).reshape(-1, 1)
    if np.any(e < 0) or np.any(e > 1):
        raise ValueError("eps must lie in [0, 1]")
    x_hat = Tensor(e * real + (1.0 - e) * fake, requires_grad=True, name="x_hat")
    score = critic.logits(x_hat)
    g = ad.input_gradient(ad.sum_(score), x_hat)
    return ad.mean(ad.square(ad.sub(ad.norm(g, axis=1), 1.0)))


def l2_regularizer(params) -> Tensor:
    """Euclidean norm of all parameter values taken together."""
    ps = list(params.values()) if isinstance(params, dict) else list(params)
    if not ps:
        return Tensor(0.0)
    return ad.norm(ad.concat([ad.reshape(p, (-1,)) for p in ps], axis=0))


def critic_total_loss(critic: MLP, gen: Generator, batch: Batch, z, eps, weights: LossWeights,
                      future_fake=None) -> Tensor:
    """WGAN term + lambda * penalty + alpha * L2. The generator is a constant here."""
    if future_fake is None:
        with ad.no_grad():
            future_fake = generate(gen.frozen(), batch.prior, z, batch.future.shape[1]).data
    fake = Tensor(np.asarray(future_fake.data if isinstance(future_fake, Tensor) else future_fake))
    loss = wgan_critic_term(critic_score(critic, batch.prior, fake),
                            critic_score(critic, batch.prior, batch.future))
    if weights.lambda_gp:
        gp = gradient_penalty(critic, batch.prior, batch.future, fake, eps)
        loss = ad.add(loss, ad.scale(gp, weights.lambda_gp))
    if weights.alpha_l2:
        loss = ad.add(loss, ad.scale(l2_regularizer(critic.params()), weights.alpha_l2))
    return loss


def adversarial_loss(critic: MLP, prior, future_fake) -> Tensor:
    """-D(x || G(x, z)), batch-averaged."""
    return ad.neg(ad.mean(critic_score(critic, prior, future_fake)))


def _as_batched(t, ndim):
    t = ad.as_tensor(t)
    if t.data.ndim == ndim - 1:
        t = ad.reshape(t, (1,) + t.shape)
    return t


def pose_gradient_loss(last_input_pose, predicted, p: float = 2.0, C: float = 0.0) -> Tensor:
    """max(C, [sum_t sum |y_t - y_{t-1}|^p]^(1/p)) per sample, batch-averaged.

    ``y_0`` is the last observed pose. Accepts (J, 3)/(n, J, 3) or batched
    (B, J, 3)/(B, n, J, 3) inputs.
    """
    pred = _as_batched(predicted, 4)
    last = _as_batched(last_input_pose, 3)
    B = pred.shape[0]
    if last.shape[0] != B:
        raise ad.ShapeError(f"pose_gradient_loss: batch {last.shape[0]} vs {B}")
    full = ad.concat([ad.reshape(last, (B, 1, -1)), ad.reshape(pred, (B, pred.shape[1], -1))], axis=1)
    diffs = ad.sub(full[:, 1:], full[:, :-1])
    raw = ad.norm(diffs, axis=(1, 2), ord=p)
    return ad.mean(ad.maximum(raw, C))


def bone_loss(predicted, gt_lengths, topology: SkeletonTopology) -> Tensor:
    """sum_t ||b_t - b_gt||_2 per sample, batch-averaged."""
    pred = _as_batched(predicted, 4)
    gt = np.asarray(gt_lengths, dtype=np.float64)
    if gt.ndim == 1:
        gt = gt[None]
    if gt.shape[-1] != len(topology.bones) or pred.shape[2] != topology.joints:
        raise ad.ShapeError(
            f"bone_loss: topology has {topology.joints} joints / {len(topology.bones)} bones, "
            f"got poses {pred.shape} and lengths {gt.shape}"
        )
    vec = ad.sub(pred[:, :, topology.children], pred[:, :, topology.parents])
    lengths = ad.norm(vec, axis=3)  # (B, n, bones)
    delta = ad.sub(lengths, gt[:, None, :])
    per_frame = ad.norm(delta, axis=2)  # (B, n)
    return ad.mean(ad.sum_(per_frame, axis=1))


def generator_total_loss(gen: Generator, critic: MLP, batch: Batch, z, weights: LossWeights,
                         topology: SkeletonTopology, fake=None) -> Tensor:
    """Adversarial + alpha_pg * pose-gradient + beta * bone. The critic is a constant here."""
    if fake is None:
        fake = generate(gen, batch.prior, z, batch.future.shape[1])
    loss = adversarial_loss(critic.frozen(), batch.prior, fake)
    if weights.alpha_pg:
        pg = pose_gradient_loss(batch.prior[:, -1], fake, weights.p, weights.pg_floor_C)
        loss = ad.add(loss, ad.scale(pg, weights.alpha_pg))
    if weights.beta_bone:
        loss = ad.add(loss, ad.scale(bone_loss(fake, batch.bones, topology), weights.beta_bone))
    return loss


def gan_discriminator_loss(prob_real, prob_fake, disc_params=None, alpha: float = 0.0) -> Tensor:
    """-(log p_real + log(1 - p_fake)) batch-averaged, plus alpha * ||theta_disc||."""
    pr = ad.clip(prob_real, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pf = ad.clip(prob_fake, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = ad.neg(ad.mean(ad.add(ad.log(pr), ad.log(ad.sub(1.0, pf)))))
    if alpha and disc_params is not None:
        loss = ad.add(loss, ad.scale(l2_regularizer(disc_params), alpha))
    return loss


def discriminator_total_loss(disc: MLP, gen: Generator, batch: Batch, z, weights: LossWeights,
                             future_fake=None) -> Tensor:
    if future_fake is None:
        with ad.no_grad():
            future_fake = generate(gen.frozen(), batch.prior, z, batch.future.shape[1]).data
    fake = Tensor(np.asarray(future_fake.data if isinstance(future_fake, Tensor) else future_fake))
    return gan_discriminator_loss(
        discriminator_prob(disc, batch.prior, batch.future),
        discriminator_prob(disc, batch.prior, fake),
        disc.params(), weights.alpha_l2,
    )


def reconstruction_mse(predicted, ground_truth) -> Tensor:
    """Mean squared error over all frames, joints and axes (harness loss)."""
    return ad.mean(ad.square(ad.sub(predicted, ground_truth)))
