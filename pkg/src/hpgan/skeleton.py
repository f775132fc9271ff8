"""Skeleton data model, file ingestion and preprocessing."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

NORM_EPS = 1e-9


class SkeletonError(ValueError):
    pass


class SkeletonParseError(SkeletonError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SkeletonTopology:
    joints: int
    bones: tuple
    name: str = "skeleton"

    def __post_init__(self):
        bones = tuple((int(p), int(c)) for p, c in self.bones)
        object.__setattr__(self, "bones", bones)
        J = int(self.joints)
        if not bones:
            raise SkeletonError("topology needs at least one bone")
        for p, c in bones:
            if not (0 <= p < J and 0 <= c < J):
                raise SkeletonError(f"bone ({p}, {c}) out of range for {J} joints")
            if p == c:
                raise SkeletonError(f"bone ({p}, {c}) connects a joint to itself")
        parent = list(range(J))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for p, c in bones:
            rp, rc = find(p), find(c)
            if rp == rc:
                raise SkeletonError(f"bones contain a cycle through ({p}, {c})")
            parent[rp] = rc
        if len(bones) != J - 1:
            raise SkeletonError(f"bones do not connect all {J} joints")

    @property
    def parents(self) -> np.ndarray:
        return np.array([p for p, _ in self.bones], dtype=np.int64)

    @property
    def children(self) -> np.ndarray:
        return np.array([c for _, c in self.bones], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"joints": self.joints, "bones": [list(b) for b in self.bones], "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTopology":
        return cls(int(d["joints"]), tuple(tuple(b) for b in d["bones"]), str(d.get("name", "skeleton")))


# Kinect v2 / NTU RGB+D, 25 joints (0-based).
NTU25 = SkeletonTopology(
    25,
    tuple((p - 1, c - 1) for p, c in [
        (1, 2), (2, 21), (21, 3), (3, 4), (21, 5), (5, 6), (6, 7), (7, 8), (8, 22), (8, 23),
        (21, 9), (9, 10), (10, 11), (11, 12), (12, 24), (12, 25), (1, 13), (13, 14),
        (14, 15), (15, 16), (1, 17), (17, 18), (18, 19), (19, 20),
    ]),
    "ntu25",
)

_H36M_PARENTS = [0, 1, 2, 3, 4, 5, 1, 7, 8, 9, 10, 1, 12, 13, 14, 15, 13,
                 17, 18, 19, 20, 21, 20, 23, 13, 25, 26, 27, 28, 29, 28, 31]
H36M32 = SkeletonTopology(
    32, tuple((_H36M_PARENTS[i] - 1, i) for i in range(1, 32)), "h36m32"
)


def chain_topology(joints: int) -> SkeletonTopology:
    """Binary-tree chain used by the synthetic generator: parent(i) = (i-1)//2."""
    if joints < 2:
        raise SkeletonError("topology needs at least 2 joints")
    return SkeletonTopology(joints, tuple(((i - 1) // 2, i) for i in range(1, joints)), f"synth{joints}")


@dataclass
class SkeletonSequence:
    topology: SkeletonTopology
    frames: np.ndarray
    frame_step: int = 1
    source: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise SkeletonError(f"frames must have shape (T, J, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise SkeletonError("sequence needs at least one frame")
        if frames.shape[1] != self.topology.joints:
            raise SkeletonError(
                f"frames have {frames.shape[1]} joints, topology expects {self.topology.joints}"
            )
        if not np.all(np.isfinite(frames)):
            raise SkeletonError("frames contain non-finite coordinates")
        self.frames = frames

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class NormalizationParams:
    """Per-axis bounds of the affine map to [-1, 1] plus the subtracted CoG."""

    lower: tuple
    upper: tuple
    center_of_gravity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != 3 or len(hi) != 3:
            raise SkeletonError("bounds need three axes")
        for a, (l, h) in enumerate(zip(lo, hi)):
            if not h > l:
                raise SkeletonError(f"degenerate bounds on axis {a}: min {l} >= max {h}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "center_of_gravity", tuple(float(v) for v in self.center_of_gravity))

    def with_cog(self, cog) -> "NormalizationParams":
        return NormalizationParams(self.lower, self.upper, tuple(cog))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper),
                "center_of_gravity": list(self.center_of_gravity)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(d["lower"], d["upper"], d.get("center_of_gravity", (0.0, 0.0, 0.0)))


# Kinect v2 frustum (70 x 60 degree FOV) at 5 m depth.
NTU_BOUNDS = NormalizationParams((-3.50, -2.89, 0.0), (3.50, 2.89, 5.0))


def bounds_from_data(sequences: Sequence[SkeletonSequence]) -> NormalizationParams:
    """Shared bounds: min of per-axis mins and max of per-axis maxes."""
    if not sequences:
        raise SkeletonError("no sequences to compute bounds from")
    lo = min(float(s.frames.min()) for s in sequences)
    hi = max(float(s.frames.max()) for s in sequences)
    return NormalizationParams((lo,) * 3, (hi,) * 3)


def affine_to_unit(frames: np.ndarray, params: NormalizationParams) -> np.ndarray:
    lo = np.asarray(params.lower)
    hi = np.asarray(params.upper)
    return 2.0 * (np.asarray(frames, dtype=np.float64) - lo) / (hi - lo) - 1.0


def normalize_frames(frames, params: NormalizationParams, prior_frames: int | None = None):
    """Affine map to [-1, 1] then subtract the CoG of the first ``prior_frames``
    frames (all frames by default). Returns (frames, params with CoG)."""
    unit = affine_to_unit(frames, params)
    k = unit.shape[0] if prior_frames is None else prior_frames
    if not 1 <= k <= unit.shape[0]:
        raise SkeletonError(f"prior_frames={k} outside 1..{unit.shape[0]}")
    cog = unit[:k].reshape(-1, 3).mean(axis=0)
    return unit - cog, params.with_cog(cog)


def denormalize_frames(frames, params: NormalizationParams) -> np.ndarray:
    lo = np.asarray(params.lower)
    hi = np.asarray(params.upper)
    unit = np.asarray(frames, dtype=np.float64) + np.asarray(params.center_of_gravity)
    return (unit + 1.0) * (hi - lo) / 2.0 + lo


def normalize(seq: SkeletonSequence, params: NormalizationParams, prior_frames: int | None = None):
    frames, used = normalize_frames(seq.frames, params, prior_frames)
    return SkeletonSequence(seq.topology, frames, seq.frame_step, seq.source), used


def denormalize(seq: SkeletonSequence, params: NormalizationParams) -> SkeletonSequence:
    return SkeletonSequence(seq.topology, denormalize_frames(seq.frames, params), seq.frame_step, seq.source)


@dataclass
class TrainingSample:
    prior: np.ndarray
    future: np.ndarray
    normalization: NormalizationParams | None = None
    source: str = ""
    start: int = 0

    @property
    def frames(self) -> np.ndarray:
        return np.concatenate([self.prior, self.future], axis=0)


def window_samples(seq: SkeletonSequence, m: int, n: int, stride: int = 1, frame_step: int = 1,
                   bounds: NormalizationParams | None = None) -> list:
    """Subsample by ``frame_step`` then slide an (m + n)-frame window.

    With ``bounds`` each window is normalized, its CoG taken over the prior.
    """
    if min(m, n, stride, frame_step) < 1:
        raise SkeletonError("m, n, stride and frame_step must all be >= 1")
    frames = seq.frames[::frame_step]
    T = frames.shape[0]
    out = []
    for start in range(0, T - (m + n) + 1, stride):
        win = frames[start:start + m + n]
        norm = None
        if bounds is not None:
            win, norm = normalize_frames(win, bounds, prior_frames=m)
        out.append(TrainingSample(win[:m].copy(), win[m:].copy(), norm, seq.source, start * frame_step))
    return out


def bone_lengths(pose, topology: SkeletonTopology) -> np.ndarray:
    """Bone lengths in bone-list order; works on any (..., J, 3) array."""
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape[-2:] != (topology.joints, 3):
        raise SkeletonError(f"pose shape {pose.shape} does not match {topology.joints} joints")
    d = pose[..., topology.children, :] - pose[..., topology.parents, :]
    return np.sqrt(np.sum(d * d, axis=-1))


# ------------------------------------------------------------------ NTU text format


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.i = 0

    def next(self, what: str, nfields: int) -> tuple:
        while self.i < len(self.lines) and not self.lines[self.i].strip():
            self.i += 1
        if self.i >= len(self.lines):
            raise SkeletonParseError(f"unexpected end of file, expected {what}", self.i + 1)
        fields = self.lines[self.i].split()
        self.i += 1
        if len(fields) != nfields:
            raise SkeletonParseError(f"{what}: expected {nfields} fields, got {len(fields)}", self.i)
        return fields, self.i

    def int_line(self, what: str) -> int:
        (tok,), ln = self.next(what, 1)
        try:
            return int(tok)
        except ValueError:
            raise SkeletonParseError(f"{what}: not an integer: {tok!r}", ln) from None

    def rest_blank(self) -> bool:
        return all(not ln.strip() for ln in self.lines[self.i:])


def _floats(fields, ln, what):
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise SkeletonParseError(f"{what}: {exc}", ln) from None


def parse_ntu_skeleton(text: str, topology: SkeletonTopology = NTU25, source: str = "") -> list:
    """Parse a Kinect ``.skeleton`` file into one raw sequence per body ID.

    A body missing from a frame ends its sequence; frames keep x, y, z only.
    """
    lines = _Lines(text)
    nframes = lines.int_line("frame count")
    if nframes < 0:
        raise SkeletonParseError("negative frame count", 1)
    open_bodies: dict[int, list] = {}
    finished: list = []
    order: list = []
    for _ in range(nframes):
        nbodies = lines.int_line("body count")
        seen = set()
        for _ in range(nbodies):
            info, ln = lines.next("body info", 10)
            try:
                body_id = int(info[0])
            except ValueError:
                raise SkeletonParseError(f"body info: bad body id {info[0]!r}", ln) from None
            _floats(info[1:], ln, "body info")
            njoints = lines.int_line("joint count")
            if njoints != topology.joints:
                raise SkeletonParseError(
                    f"joint count {njoints} does not match topology ({topology.joints})", lines.i
                )
            pose = np.empty((njoints, 3))
            for j in range(njoints):
                fields, ln = lines.next("joint", 12)
                pose[j] = _floats(fields, ln, "joint")[:3]
            if body_id in seen:
                raise SkeletonParseError(f"body {body_id} repeated in one frame", ln)
            seen.add(body_id)
            if body_id in open_bodies:
                open_bodies[body_id].append(pose)
            elif body_id not in order:
                open_bodies[body_id] = [pose]
                order.append(body_id)
        for bid in [b for b in open_bodies if b not in seen]:
            finished.append((bid, open_bodies.pop(bid)))
    if not lines.rest_blank():
        raise SkeletonParseError("trailing content after last frame", lines.i + 1)
    finished.extend(open_bodies.items())
    by_id = dict(finished)
    label = source or "ntu"
    return [
        SkeletonSequence(topology, np.stack(by_id[bid]), 1, f"{label}#body{bid}")
        for bid in order
    ]


# ------------------------------------------------------------------ canonical JSON


def sequence_to_dict(seq: SkeletonSequence) -> dict:
    return {
        "topology": seq.topology.to_dict(),
        "frame_step": seq.frame_step,
        "frames": seq.frames.tolist(),
    }


def serialize_canonical_json(seq: SkeletonSequence) -> str:
    return json.dumps(sequence_to_dict(seq))


def parse_canonical_json(text: str, source: str = "") -> SkeletonSequence:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SkeletonParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise SkeletonParseError("document must be an object")
    for key in ("topology", "frames"):
        if key not in doc:
            raise SkeletonParseError(f"missing field {key!r}")
    topo = doc["topology"]
    if not isinstance(topo, dict) or "joints" not in topo or "bones" not in topo:
        raise SkeletonParseError("topology needs 'joints' and 'bones'")
    try:
        bones = tuple(tuple(int(v) for v in b) for b in topo["bones"])
        if any(len(b) != 2 for b in bones):
            raise SkeletonParseError("each bone must be a [parent, child] pair")
        topology = SkeletonTopology(int(topo["joints"]), bones, str(topo.get("name", "skeleton")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SkeletonParseError):
            raise
        raise SkeletonParseError(f"bad topology: {exc}") from None
    frames = doc["frames"]
    J = topology.joints
    if not isinstance(frames, list) or not frames:
        raise SkeletonParseError("frames must be a non-empty list")
    for t, fr in enumerate(frames):
        if not isinstance(fr, list) or len(fr) != J or any(
            not isinstance(p, list) or len(p) != 3 for p in fr
        ):
            raise SkeletonParseError(f"frame {t} is not a {J} x 3 array")
    try:
        arr = np.array(frames, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SkeletonParseError(f"non-numeric coordinate: {exc}") from None
    step = doc.get("frame_step", 1)
    if not isinstance(step, int) or step < 1:
        raise SkeletonParseError(f"frame_step must be a positive integer, got {step!r}")
    try:
        return SkeletonSequence(topology, arr, step, source)
    except SkeletonError as exc:
        raise SkeletonParseError(str(exc)) from None


def load_sequences(path) -> list:
    """Load every ``*.json`` / ``*.skeleton`` file under a directory (or one file)."""
    path = Path(path)
    files = [path] if path.is_file() else sorted(
        p for p in path.iterdir() if p.suffix in (".json", ".skeleton")
    )
    out = []
    for f in files:
        text = f.read_text()
        if f.suffix == ".skeleton":
            out.extend(parse_ntu_skeleton(text, source=f.name))
        else:
            out.append(parse_canonical_json(text, source=f.name))
    return out


# ------------------------------------------------------------------ synthetic motion


@dataclass
class SynthConfig:
    sequences: int = 200
    frames: int = 40
    topology_size: int = 5
    seed: int = 0
    bone_range: tuple = (0.25, 0.45)
    angular_speed: tuple = (0.08, 0.20)  # rad / frame
    swing: tuple = (0.3, 0.7)  # rad
    root_speed: tuple = (0.01, 0.03)


def synth_generate(config: SynthConfig | None = None, **kwargs) -> list:
    """Procedural kinematic-chain motion, deterministic in ``seed``.

    The root drifts along a slow sinusoid; every other joint swings around
    its parent on a sphere of fixed radius, so bone lengths stay constant.
    """
    cfg = config or SynthConfig(**kwargs)
    topo = chain_topology(cfg.topology_size)
    rng = np.random.default_rng(cfg.seed)
    t = np.arange(cfg.frames, dtype=np.float64)
    out = []
    for s in range(cfg.sequences):
        J = topo.joints
        pos = np.zeros((cfg.frames, J, 3))
        centre = rng.uniform([-0.5, -0.2, 2.5], [0.5, 0.2, 3.5])
        amp = rng.uniform(0.05, 0.3, 3)
        w_root = rng.uniform(*cfg.root_speed, 3)
        ph_root = rng.uniform(0, 2 * np.pi, 3)
        pos[:, 0] = centre + amp * np.sin(np.outer(t, w_root) + ph_root)
        for p, c in topo.bones:
            length = rng.uniform(*cfg.bone_range)
            theta0 = rng.uniform(0.3, np.pi - 0.3)
            phi0 = rng.uniform(0, 2 * np.pi)
            a_th, a_ph = rng.uniform(*cfg.swing, 2)
            w_th, w_ph = rng.uniform(*cfg.angular_speed, 2)
            p_th, p_ph = rng.uniform(0, 2 * np.pi, 2)
            theta = theta0 + a_th * np.sin(w_th * t + p_th)
            phi = phi0 + a_ph * np.sin(w_ph * t + p_ph)
            direction = np.stack(
                [np.sin(theta) * np.cos(phi), np.cos(theta), np.sin(theta) * np.sin(phi)], axis=1
            )
            pos[:, c] = pos[:, p] + length * direction
        out.append(SkeletonSequence(topo, pos, 1, f"synth{cfg.seed}_{s:04d}"))
    return out
