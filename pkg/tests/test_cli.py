import json

import numpy as np
import pytest

from hpgan import skeleton as sk
from hpgan import trainer as tr
from hpgan.cli import main
from hpgan.models import MLP

TINY = ["m=3", "n=3", "z_dim=4", "hidden_dim=6", "critic_hidden=8,4", "k_critic=1",
        "quality_N=4", "batch_size=4", "stride=4"]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--sequences", "3", "--frames", "12",
                 "--joints", "4", "--seed", "2"]) == 0
    assert main(["train", "--data", str(root / "data"), "--out", str(root / "run"), "--epochs", "2",
                 *TINY]) == 0
    return root


def test_synth_files_and_determinism(tmp_path):
    args = ["--sequences", "3", "--frames", "40", "--joints", "5", "--seed", "7"]
    assert main(["synth", "--out", str(tmp_path / "a"), *args]) == 0
    assert main(["synth", "--out", str(tmp_path / "b"), *args]) == 0
    files = sorted((tmp_path / "a").iterdir())
    assert len(files) == 3
    for f in files:
        seq = sk.parse_canonical_json(f.read_text())
        assert seq.frames.shape == (40, 5, 3)
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_synth_usage_errors(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--joints", "1"]) == 1
    assert main(["synth", "--out", str(tmp_path), "--sequences", "0"]) == 1
    assert main(["synth"]) == 1
    assert main(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_train_artifacts_and_overrides(run):
    out = run / "run"
    assert {p.name for p in out.iterdir()} >= {"best.json", "final.json", "losses.csv", "quality.csv"}
    cfg = tr.load_checkpoint(out / "final.json").training_config
    assert cfg.k_critic == 1 and cfg.epochs == 2 and cfg.critic_hidden == (8, 4)
    assert (out / "losses.csv").read_text().startswith("step,critic_loss,generator_loss,discriminator_loss\n")
    q = (out / "quality.csv").read_text().splitlines()
    assert q[0] == "epoch,count_above_half,mean_prob" and len(q) == 3


def test_train_config_file(run, tmp_path):
    conf = tmp_path / "c.cfg"
    conf.write_text("\n".join(TINY) + "\nweights.alpha_pg = 0.5\n")
    assert main(["train", "--data", str(run / "data"), "--config", str(conf), "--out", str(tmp_path / "r"),
                 "--epochs", "1"]) == 0
    assert tr.load_checkpoint(tmp_path / "r" / "best.json").training_config.weights.alpha_pg == 0.5


def test_train_errors(run, tmp_path, capsys):
    data = str(run / "data")
    assert main(["train", "--data", data, "--epochs", "0", *TINY]) == 1
    assert main(["train", "--data", data, "bogus_key=3"]) == 1
    assert main(["train", "--data", data, "weights.alpha_pg=lots"]) == 1
    assert "weights.alpha_pg" in capsys.readouterr().err
    assert main(["train", "--data", str(tmp_path / "missing")]) == 2
    assert main(["train", "--data", data, "--config", str(tmp_path / "none.cfg")]) == 2
    # sequences of 12 frames cannot hold the default 10 + 30 window
    assert main(["train", "--data", data, "--out", str(tmp_path / "r")]) == 2


def test_predict_outputs_and_determinism(run, tmp_path):
    inp = sorted((run / "data").iterdir())[0]
    ck = run / "run" / "best.json"
    for d in ("a", "b"):
        assert main(["predict", "--checkpoint", str(ck), "--input", str(inp), "--num-futures", "5",
                     "--seed", "3", "--out", str(tmp_path / d)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len([f for f in files if f.endswith(".json")]) == 5
    assert len([f for f in files if f.endswith(".svg")]) == 5
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    a = sk.parse_canonical_json((tmp_path / "a" / "future_00.json").read_text())
    b = sk.parse_canonical_json((tmp_path / "a" / "future_01.json").read_text())
    assert a.frames.shape == (3, 4, 3) and not np.array_equal(a.frames, b.frames)
    strip = (tmp_path / "a" / "future_00.svg").read_text()
    assert strip.startswith("<?xml") and "<line" in strip


def test_predict_errors(run, tmp_path):
    ck = str(run / "run" / "best.json")
    short = sk.synth_generate(sequences=1, frames=2, topology_size=4, seed=0)[0]
    (tmp_path / "short.json").write_text(sk.serialize_canonical_json(short))
    assert main(["predict", "--checkpoint", ck, "--input", str(tmp_path / "short.json")]) == 2
    other = sk.synth_generate(sequences=1, frames=8, topology_size=5, seed=0)[0]
    (tmp_path / "other.json").write_text(sk.serialize_canonical_json(other))
    assert main(["predict", "--checkpoint", ck, "--input", str(tmp_path / "other.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["predict", "--checkpoint", ck, "--input", str(tmp_path / "bad.json")]) == 2
    (tmp_path / "cut.json").write_text((run / "run" / "best.json").read_text()[:100])
    inp = str(sorted((run / "data").iterdir())[0])
    assert main(["predict", "--checkpoint", str(tmp_path / "cut.json"), "--input", inp]) == 2


def test_score_zero_discriminator_prints_half(run, tmp_path, capsys):
    ckpt = tr.load_checkpoint(run / "run" / "best.json")
    model = ckpt.restore()
    model.disc = MLP.init(None, model.disc.input_dim, (8, 4), sigmoid_output=True, zero=True, prefix="disc")
    fresh = tr.Checkpoint.capture(model, ckpt.training_config, 0,
                                  normalization=sk.NormalizationParams.from_dict(ckpt.normalization))
    tr.save_checkpoint(fresh, tmp_path / "z.json")
    seq = sk.synth_generate(sequences=1, frames=6, topology_size=4, seed=0)[0]
    (tmp_path / "s.json").write_text(sk.serialize_canonical_json(seq))
    capsys.readouterr()
    assert main(["score", "--checkpoint", str(tmp_path / "z.json"), "--input", str(tmp_path / "s.json")]) == 0
    assert capsys.readouterr().out.strip() == "0.5"


def test_score_errors(run, tmp_path):
    ck = str(run / "run" / "best.json")
    seq = sk.synth_generate(sequences=1, frames=7, topology_size=4, seed=0)[0]
    (tmp_path / "s.json").write_text(sk.serialize_canonical_json(seq))
    assert main(["score", "--checkpoint", ck, "--input", str(tmp_path / "s.json")]) == 2
    (tmp_path / "bad.json").write_text('{"frames": ')
    assert main(["score", "--checkpoint", ck, "--input", str(tmp_path / "bad.json")]) == 2


def test_plot(run, tmp_path):
    (tmp_path / "l.csv").write_text("step,critic_loss,generator_loss,discriminator_loss\n"
                                    "0,1.0,2.0,1.3\n1,0.5,1.5,1.2\n2,0.25,1.0,1.1\n")
    for name in ("a.svg", "b.svg"):
        assert main(["plot", "--losses", str(tmp_path / "l.csv"), "--out", str(tmp_path / name)]) == 0
    text = (tmp_path / "a.svg").read_text()
    assert text.count("<polyline") == 3
    assert all(label in text for label in ("critic", "generator", "discriminator"))
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert main(["plot", "--losses", str(run / "run" / "losses.csv"), "--out", str(tmp_path / "c.svg")]) == 0


def test_plot_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("step,critic_loss,generator_loss,discriminator_loss\n")
    assert main(["plot", "--losses", str(tmp_path / "empty.csv"), "--out", str(tmp_path / "o.svg")]) == 2
    (tmp_path / "cols.csv").write_text("step,critic_loss\n0,1\n")
    assert main(["plot", "--losses", str(tmp_path / "cols.csv"), "--out", str(tmp_path / "o.svg")]) == 2
    assert main(["plot", "--losses", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.svg")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_abort_exit_code(tmp_path):
    seq = sk.synth_generate(sequences=1, frames=8, topology_size=3, seed=0)[0]
    doc = json.loads(sk.serialize_canonical_json(seq))
    # a 1e300 coordinate survives parsing but overflows once squared in the losses
    doc["frames"][0][0][0] = 1e300
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "s.json").write_text(json.dumps(doc))
    code = main(["train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "r"), "--epochs", "1",
                 "bounds=ntu", *TINY])
    assert code == 3
