import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpgan import skeleton as sk
from conftest import ntu_text


# ---------------------------------------------------------------- topology


def test_builtin_topologies_are_trees():
    assert len(sk.NTU25.bones) == 24
    assert len(sk.H36M32.bones) == 31
    assert sk.chain_topology(5).bones == ((0, 1), (0, 2), (1, 3), (1, 4))


@pytest.mark.parametrize("joints,bones,msg", [
    (2, [(0, 1), (1, 0)], "cycle"),
    (2, [(0, 0)], "itself"),
    (2, [(0, 2)], "range"),
    (3, [(0, 1)], "connect"),
    (2, [], "at least one"),
])
def test_topology_validation(joints, bones, msg):
    with pytest.raises(sk.SkeletonError, match=msg):
        sk.SkeletonTopology(joints, tuple(bones))


def test_chain_needs_two_joints():
    with pytest.raises(sk.SkeletonError):
        sk.chain_topology(1)


# ---------------------------------------------------------------- NTU parser


def test_parse_crafted_file(crafted_pose):
    seqs = sk.parse_ntu_skeleton(ntu_text([[crafted_pose], [crafted_pose]]))
    assert len(seqs) == 1
    assert seqs[0].frames.shape == (2, 25, 3)
    np.testing.assert_array_equal(seqs[0].frames[0], crafted_pose)
    np.testing.assert_array_equal(seqs[0].frames[1], crafted_pose)


def test_zero_frames_gives_no_sequences():
    assert sk.parse_ntu_skeleton("0\n") == []


def test_two_bodies_split(crafted_pose):
    other = crafted_pose + 1.0
    seqs = sk.parse_ntu_skeleton(ntu_text([[crafted_pose, other]]))
    assert [len(s) for s in seqs] == [1, 1]
    np.testing.assert_array_equal(seqs[1].frames[0], other)


def test_vanished_body_truncates(crafted_pose):
    a, b = crafted_pose, crafted_pose + 1
    seqs = sk.parse_ntu_skeleton(ntu_text([[a, b], [a], [a]]))
    assert [len(s) for s in seqs] == [3, 1]


def test_truncated_file_reports_line(crafted_pose):
    text = ntu_text([[crafted_pose]])
    cut = "\n".join(text.splitlines()[:10])
    with pytest.raises(sk.SkeletonParseError, match="end of file") as exc:
        sk.parse_ntu_skeleton(cut)
    assert exc.value.line is not None


def test_wrong_joint_count():
    text = ntu_text([[np.zeros((3, 3))]], joints=3)
    with pytest.raises(sk.SkeletonParseError, match="joint count 3") as exc:
        sk.parse_ntu_skeleton(text)
    assert exc.value.line == 4


def test_trailing_garbage_rejected(crafted_pose):
    with pytest.raises(sk.SkeletonParseError, match="trailing"):
        sk.parse_ntu_skeleton(ntu_text([[crafted_pose]]) + "17\n")


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_any_numeric_field_mutated_to_text_is_rejected_at_its_line(data):
    pose = np.arange(75, dtype=float).reshape(25, 3) / 10
    lines = ntu_text([[pose], [pose]]).splitlines()
    i = data.draw(st.integers(0, len(lines) - 1))
    fields = lines[i].split()
    k = data.draw(st.integers(0, len(fields) - 1))
    fields[k] = "abc"
    lines[i] = " ".join(fields)
    with pytest.raises(sk.SkeletonParseError) as exc:
        sk.parse_ntu_skeleton("\n".join(lines))
    assert exc.value.line == i + 1


# ---------------------------------------------------------------- canonical JSON

DOC = {"topology": {"joints": 2, "bones": [[0, 1]], "name": "pair"},
       "frame_step": 1,
       "frames": [[[0.0, 0.0, 0.0], [0.5, 0.25, -1.0]]]}


def test_json_round_trip():
    seq = sk.parse_canonical_json(json.dumps(DOC))
    assert json.loads(sk.serialize_canonical_json(seq)) == DOC


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=6, max_size=6))
def test_json_round_trip_exact_floats(vals):
    seq = sk.SkeletonSequence(sk.chain_topology(2), np.array(vals).reshape(1, 2, 3))
    back = sk.parse_canonical_json(sk.serialize_canonical_json(seq))
    np.testing.assert_array_equal(back.frames, seq.frames)


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d["topology"].update(bones=[[0, 1], [1, 0]]), "cycle"),
    (lambda d: d["frames"][0].append([1.0, 2.0, 3.0]), "frame 0"),
    (lambda d: d["frames"][0][1].pop(), "frame 0"),
    (lambda d: d.pop("frames"), "frames"),
    (lambda d: d["frames"][0][0].__setitem__(0, "x"), "non-numeric"),
    (lambda d: d.update(frame_step=0), "frame_step"),
])
def test_json_schema_errors(mutate, msg):
    doc = json.loads(json.dumps(DOC))
    mutate(doc)
    with pytest.raises(sk.SkeletonParseError, match=msg):
        sk.parse_canonical_json(json.dumps(doc))


def test_malformed_json():
    with pytest.raises(sk.SkeletonParseError, match="invalid JSON"):
        sk.parse_canonical_json("{not json")


def test_load_sequences_mixed_directory(tmp_path, crafted_pose):
    (tmp_path / "a.skeleton").write_text(ntu_text([[crafted_pose]]))
    (tmp_path / "b.json").write_text(json.dumps(DOC))
    (tmp_path / "notes.txt").write_text("ignored")
    seqs = sk.load_sequences(tmp_path)
    assert [s.topology.joints for s in seqs] == [25, 2]


# ---------------------------------------------------------------- normalization


def test_ntu_midpoint_maps_to_zero():
    unit = sk.affine_to_unit(np.array([[[0.0, 0.0, 2.5]]]), sk.NTU_BOUNDS)
    np.testing.assert_array_equal(unit, [[[0.0, 0.0, 0.0]]])
    np.testing.assert_array_equal(sk.affine_to_unit(np.array([[[3.5, 2.89, 5.0]]]), sk.NTU_BOUNDS),
                                  [[[1.0, 1.0, 1.0]]])


def test_single_joint_single_frame_centres_to_origin():
    seq = sk.SkeletonSequence(sk.SkeletonTopology(2, ((0, 1),)), np.array([[[1.0, 2.0, 3.0]] * 2]))
    out, _ = sk.normalize(seq, sk.NTU_BOUNDS)
    np.testing.assert_allclose(out.frames, 0.0, atol=1e-15)


def test_cog_uses_prior_frames_only():
    frames = np.zeros((4, 2, 3))
    frames[2:] = 1.0  # future frames move
    params = sk.NormalizationParams((-1.0,) * 3, (1.0,) * 3)
    out, used = sk.normalize_frames(frames, params, prior_frames=2)
    np.testing.assert_array_equal(used.center_of_gravity, (0.0, 0.0, 0.0))
    np.testing.assert_array_equal(out[2:], 1.0)


def test_degenerate_bounds_rejected():
    with pytest.raises(sk.SkeletonError):
        sk.NormalizationParams((0.0, 0.0, 1.0), (1.0, 1.0, 1.0))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), prior=st.integers(1, 6))
def test_normalize_denormalize_identity(seed, prior):
    rng = np.random.default_rng(seed)
    frames = rng.uniform([-3, -2, 0.5], [3, 2, 4.5], (6, 4, 3))
    out, used = sk.normalize_frames(frames, sk.NTU_BOUNDS, prior_frames=prior)
    assert np.max(np.abs(sk.denormalize_frames(out, used) - frames)) < 1e-9


def test_normalized_in_unit_box_before_centering():
    seqs = sk.synth_generate(sequences=5, frames=12, seed=3)
    bounds = sk.bounds_from_data(seqs)
    for s in seqs:
        unit = sk.affine_to_unit(s.frames, bounds)
        assert unit.min() >= -1 - sk.NORM_EPS and unit.max() <= 1 + sk.NORM_EPS


def test_normalization_params_dict_round_trip():
    p = sk.NTU_BOUNDS.with_cog((0.1, -0.2, 0.3))
    assert sk.NormalizationParams.from_dict(p.to_dict()) == p


# ---------------------------------------------------------------- windows


def _clip(T, J=2):
    frames = np.arange(T * J * 3, dtype=float).reshape(T, J, 3)
    return sk.SkeletonSequence(sk.chain_topology(J), frames)


def test_window_exact_fit():
    assert len(sk.window_samples(_clip(40), 10, 30)) == 1
    assert sk.window_samples(_clip(39), 10, 30) == []


def test_window_frame_step():
    seq = _clip(80)
    (s,) = sk.window_samples(seq, 10, 30, frame_step=2)
    np.testing.assert_array_equal(s.frames, seq.frames[0:80:2])
    np.testing.assert_array_equal(s.prior, seq.frames[0:20:2])


@settings(max_examples=60, deadline=None)
@given(T=st.integers(1, 60), m=st.integers(1, 8), n=st.integers(1, 8),
       stride=st.integers(1, 5), step=st.integers(1, 3))
def test_window_count_formula(T, m, n, stride, step):
    Tp = len(range(0, T, step))
    expect = (Tp - (m + n)) // stride + 1 if Tp >= m + n else 0
    assert len(sk.window_samples(_clip(T), m, n, stride, step)) == expect


def test_window_rejects_bad_sizes():
    with pytest.raises(sk.SkeletonError):
        sk.window_samples(_clip(10), 0, 3)


# ---------------------------------------------------------------- bones


def test_bone_lengths_examples():
    topo = sk.chain_topology(2)
    np.testing.assert_array_equal(sk.bone_lengths([[0, 0, 0], [3, 4, 0]], topo), [5.0])
    np.testing.assert_array_equal(sk.bone_lengths([[1, 1, 1], [1, 1, 1]], topo), [0.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_bone_lengths_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    topo = sk.chain_topology(6)
    pose = rng.uniform(-1, 1, (6, 3))
    base = sk.bone_lengths(pose, topo)
    shift = rng.uniform(-5, 5, 3)
    np.testing.assert_array_equal(sk.bone_lengths(pose - pose[0] + pose[0], topo), base)
    assert np.max(np.abs(sk.bone_lengths(pose + shift, topo) - base)) < 1e-12
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    assert np.max(np.abs(sk.bone_lengths(pose @ q.T, topo) - base)) < 1e-9


def test_bone_lengths_shape_check():
    with pytest.raises(sk.SkeletonError):
        sk.bone_lengths(np.zeros((3, 3)), sk.chain_topology(2))


# ---------------------------------------------------------------- synthetic data


def test_synth_shape_and_determinism():
    a = sk.synth_generate(sequences=200, frames=40, seed=7)
    b = sk.synth_generate(sequences=200, frames=40, seed=7)
    assert len(a) == 200 and all(s.frames.shape == (40, 5, 3) for s in a)
    assert all(x.frames.tobytes() == y.frames.tobytes() for x, y in zip(a, b))
    c = sk.synth_generate(sequences=2, frames=40, seed=8)
    assert c[0].frames.tobytes() != a[0].frames.tobytes()


@pytest.mark.parametrize("J", [2, 5, 9])
def test_synth_bone_lengths_constant(J):
    for s in sk.synth_generate(sequences=10, frames=30, topology_size=J, seed=1):
        L = sk.bone_lengths(s.frames, s.topology)
        assert np.max(np.abs(L - L[0])) < 1e-9
