import numpy as np
import pytest


def ntu_text(frames, joints=25, body_ids=None):
    """Build a Kinect .skeleton file. ``frames`` is a list of frames, each a
    list of (J, 3) arrays, one per body."""
    lines = [str(len(frames))]
    for bodies in frames:
        lines.append(str(len(bodies)))
        for b, pose in enumerate(bodies):
            bid = (body_ids or {}).get(b, 72057594037931100 + b)
            lines.append(f"{bid} 0 1 1 1 1 0 0.1 -0.05 2")
            lines.append(str(joints))
            for x, y, z in np.asarray(pose, dtype=float).tolist():
                lines.append(f"{x!r} {y!r} {z!r} 260.1 190.5 1020.3 540.2 0.1 0.2 0.3 0.9 2")
    return "\n".join(lines) + "\n"


@pytest.fixture
def crafted_pose():
    return np.array([[0.1 * j, 0.0, 2.0] for j in range(25)])


def desk_setup(seed, J=3, m=2, n=2, H=8, critic_hidden=(16, 8), z_dim=4, B=4):
    """Small random generator, critic, discriminator and batch for gradient checks."""
    from hpgan import losses as L, skeleton as sk
    from hpgan.models import MLP, Generator

    rng = np.random.default_rng(seed)
    topo = sk.chain_topology(J)
    gen = Generator.init(rng, J, H, 2, z_dim)
    for p in gen.params().values():
        p.data = rng.uniform(-0.5, 0.5, p.shape)
    in_dim = (m + n) * J * 3
    critic = MLP.init(rng, in_dim, critic_hidden)
    disc = MLP.init(rng, in_dim, critic_hidden, sigmoid_output=True, prefix="disc")
    for net in (critic, disc):
        for b in net.biases:
            b.data = rng.uniform(-0.3, 0.3, b.shape)
    prior = rng.uniform(-1, 1, (B, m, J, 3))
    future = rng.uniform(-1, 1, (B, n, J, 3))
    bones = sk.bone_lengths(np.concatenate([prior, future], axis=1), topo).mean(axis=1)
    return dict(gen=gen, critic=critic, disc=disc, topo=topo,
                batch=L.Batch(prior, future, bones),
                z=rng.uniform(-1, 1, (B, z_dim)), eps=rng.uniform(0, 1, B))
