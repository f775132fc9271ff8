"""Generator (seq2seq GRU with z injection), critic and discriminator."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def glorot(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, shape)


@dataclass
class GruCellParams:
    """Weights of one GRU layer, gate blocks ordered [update | reset | candidate]."""

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[0]

    @classmethod
    def init(cls, rng, input_dim: int, hidden_dim: int, zero: bool = False) -> "GruCellParams":
        H = hidden_dim
        if zero:
            wx, wh = np.zeros((input_dim, 3 * H)), np.zeros((H, 3 * H))
        else:
            wx = glorot(rng, input_dim, H, (input_dim, 3 * H))
            wh = glorot(rng, H, H, (H, 3 * H))
        return cls(Tensor(wx, True), Tensor(wh, True), Tensor(np.zeros(3 * H), True))

    def named(self, prefix: str) -> dict:
        return {f"{prefix}.w_x": self.w_x, f"{prefix}.w_h": self.w_h, f"{prefix}.b": self.b}


def gru_cell_step(cell: GruCellParams, x, h) -> Tensor:
    return ad.gru_cell(x, h, cell.w_x, cell.w_h, cell.b)


@dataclass
class Generator:
    encoder: list
    decoder: list
    z_maps: list  # per layer (A: z_dim x H, c: H)
    proj_w: Tensor
    proj_b: Tensor
    joints: int
    z_dim: int

    @property
    def hidden_dim(self) -> int:
        return self.encoder[0].hidden_dim

    @property
    def num_layers(self) -> int:
        return len(self.encoder)

    @classmethod
    def init(cls, rng, joints: int, hidden_dim: int = 64, num_layers: int = 2, z_dim: int = 128,
             zero: bool = False) -> "Generator":
        D = joints * 3
        enc, dec, zm = [], [], []
        for layer in range(num_layers):
            in_dim = D if layer == 0 else hidden_dim
            enc.append(GruCellParams.init(rng, in_dim, hidden_dim, zero))
            dec.append(GruCellParams.init(rng, in_dim, hidden_dim, zero))
            a = np.zeros((z_dim, hidden_dim)) if zero else glorot(rng, z_dim, hidden_dim, (z_dim, hidden_dim))
            zm.append((Tensor(a, True), Tensor(np.zeros(hidden_dim), True)))
        pw = np.zeros((hidden_dim, D)) if zero else glorot(rng, hidden_dim, D, (hidden_dim, D))
        return cls(enc, dec, zm, Tensor(pw, True), Tensor(np.zeros(D), True), joints, z_dim)

    def params(self) -> dict:
        out = {}
        for i, cell in enumerate(self.encoder):
            out.update(cell.named(f"gen.enc{i}"))
        for i, cell in enumerate(self.decoder):
            out.update(cell.named(f"gen.dec{i}"))
        for i, (a, c) in enumerate(self.z_maps):
            out[f"gen.zmap{i}.A"] = a
            out[f"gen.zmap{i}.c"] = c
        out["gen.proj.w"] = self.proj_w
        out["gen.proj.b"] = self.proj_b
        return out

    def frozen(self) -> "Generator":
        d = lambda c: GruCellParams(c.w_x.detach(), c.w_h.detach(), c.b.detach())
        return replace(
            self,
            encoder=[d(c) for c in self.encoder],
            decoder=[d(c) for c in self.decoder],
            z_maps=[(a.detach(), c.detach()) for a, c in self.z_maps],
            proj_w=self.proj_w.detach(),
            proj_b=self.proj_b.detach(),
        )


def _batch_poses(poses) -> np.ndarray:
    """(T, J, 3) or (B, T, J, 3) -> (B, T, J*3)."""
    arr = np.asarray(poses, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ad.ShapeError(f"poses must be (B, T, J, 3), got {arr.shape}")
    return arr.reshape(arr.shape[0], arr.shape[1], -1)


def encode(gen: Generator, prior):
    """Run the stacked GRU over the prior. Returns (final states per layer,
    last top-layer output)."""
    x = _batch_poses(prior)
    B, m, D = x.shape
    if m < 1:
        raise ValueError("encode: prior needs at least one frame")
    if D != gen.joints * 3:
        raise ad.ShapeError(f"encode: prior has {D // 3} joints, generator expects {gen.joints}")
    seq = [Tensor(x[:, t]) for t in range(m)]
    states = []
    for cell in gen.encoder:
        h = Tensor(np.zeros((B, cell.hidden_dim)))
        outs = []
        for xt in seq:
            h = gru_cell_step(cell, xt, h)
            outs.append(h)
        states.append(h)
        seq = outs
    return states, seq[-1]


def inject_z(gen: Generator, states: list, z) -> list:
    """Decoder initial state per layer: encoder state + (z A_l + c_l)."""
    z = ad.as_tensor(z)
    if z.data.ndim == 1:
        z = ad.reshape(z, (1, -1))
    if z.shape[-1] != gen.z_dim:
        raise ad.ShapeError(f"inject_z: z has length {z.shape[-1]}, expected {gen.z_dim}")
    return [ad.add(s, ad.add(ad.matmul(z, a), c)) for s, (a, c) in zip(states, gen.z_maps)]


def decode(gen: Generator, init_states: list, first_input, n: int) -> list:
    """Autoregressive rollout of ``n`` poses; returns a list of (B, J*3) tensors."""
    if n < 1:
        raise ValueError("decode: n must be >= 1")
    hs = list(init_states)
    inp = ad.as_tensor(first_input)
    out = []
    for _ in range(n):
        x = inp
        for layer, cell in enumerate(gen.decoder):
            hs[layer] = gru_cell_step(cell, x, hs[layer])
            x = hs[layer]
        pose = ad.add(ad.matmul(x, gen.proj_w), gen.proj_b)
        out.append(pose)
        inp = pose
    return out


def generate(gen: Generator, prior, z, n: int) -> Tensor:
    """y = G(x, z): returns predicted future of shape (B, n, J, 3)."""
    x = _batch_poses(prior)
    z = ad.as_tensor(z)
    if z.data.ndim == 1:
        z = ad.reshape(z, (1, -1))
    if z.shape[0] != x.shape[0]:
        if x.shape[0] == 1:
            x = np.repeat(x, z.shape[0], axis=0)
        else:
            raise ad.ShapeError(f"generate: {z.shape[0]} z draws for batch of {x.shape[0]}")
    states, _ = encode(gen, x.reshape(x.shape[0], x.shape[1], -1, 3))
    init = inject_z(gen, states, z)
    poses = decode(gen, init, Tensor(x[:, -1]), n)
    B = x.shape[0]
    return ad.reshape(ad.concat(poses, axis=-1), (B, n, gen.joints, 3))


@dataclass
class MLP:
    """Three affine layers with leaky-relu(0.2) between; optional output sigmoid."""

    weights: list
    biases: list
    sigmoid_output: bool = False
    leaky: bool = True
    prefix: str = "critic"

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @classmethod
    def init(cls, rng, input_dim: int, hidden=(128, 64), sigmoid_output: bool = False,
             zero: bool = False, prefix: str = "critic") -> "MLP":
        dims = [input_dim, *hidden, 1]
        ws, bs = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            ws.append(Tensor(np.zeros((a, b)) if zero else glorot(rng, a, b, (a, b)), True))
            bs.append(Tensor(np.zeros(b), True))
        return cls(ws, bs, sigmoid_output, True, prefix)

    def params(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{self.prefix}.l{i}.w"] = w
            out[f"{self.prefix}.l{i}.b"] = b
        return out

    def frozen(self) -> "MLP":
        return replace(self, weights=[w.detach() for w in self.weights],
                       biases=[b.detach() for b in self.biases])

    def logits(self, flat) -> Tensor:
        h = ad.as_tensor(flat)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add(ad.matmul(h, w), b)
            if i < last and self.leaky:
                h = ad.leaky_relu(h)
        return h

    def __call__(self, flat) -> Tensor:
        out = self.logits(flat)
        return ad.sigmoid(out) if self.sigmoid_output else out


def flatten_sequence(prior, future) -> Tensor:
    """Concatenate prior and future along time and flatten (time, joint, axis)."""
    p = _batch_poses(prior)
    B = p.shape[0]
    fut = future if isinstance(future, Tensor) else Tensor(_batch_poses(future))
    fut_flat = ad.reshape(fut, (fut.shape[0], -1))
    if fut_flat.shape[0] != B:
        if B == 1:
            p = np.repeat(p, fut_flat.shape[0], axis=0)
            B = p.shape[0]
        else:
            raise ad.ShapeError(f"batch mismatch: prior {B} vs future {fut_flat.shape[0]}")
    return ad.concat([Tensor(p.reshape(B, -1)), fut_flat], axis=-1)


def _check_frames(net: MLP, flat: Tensor):
    if flat.shape[-1] != net.input_dim:
        raise ad.ShapeError(
            f"sequence flattens to {flat.shape[-1]} values, network expects {net.input_dim} "
            "(wrong frame count or joint count)"
        )


def critic_score(critic: MLP, prior, future) -> Tensor:
    """Unbounded score D(x || y), one per batch row, shape (B, 1)."""
    flat = flatten_sequence(prior, future)
    _check_frames(critic, flat)
    return critic.logits(flat)


def discriminator_prob(disc: MLP, prior, future) -> Tensor:
    """Probability in (0, 1) that the sequence is real motion, shape (B, 1)."""
    flat = flatten_sequence(prior, future)
    _check_frames(disc, flat)
    return ad.sigmoid(disc.logits(flat))


def sample_z(rng, count: int, z_dim: int, distribution: str = "uniform") -> np.ndarray:
    if distribution == "uniform":
        return rng.uniform(-1.0, 1.0, (count, z_dim))
    if distribution in ("normal", "gaussian"):
        return rng.standard_normal((count, z_dim))
    raise ValueError(f"unknown z distribution {distribution!r}")
