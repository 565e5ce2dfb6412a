import re
import subprocess
import sys

import numpy as np
import pytest

from bdbm import cli
from bdbm.couplings import Mapped2DCoupling
from bdbm.csvio import dim_header, read_table, write_table
from bdbm.net import checkpoint_bytes, init_params
from bdbm.schedule import BridgeSchedule, TransitionVariancePolicy

TOY = """\
schedule.kind = brownian
schedule.k = 2
coupling.kind = mapped2d
coupling.base = two_moons
net.hidden = 16,16
net.time_emb_dim = 4
train.batch = 32
train.seed = 3
"""

# identity coupling, noiseless: the bridge only has to learn to hand its source back
IDENTITY = """\
coupling.kind = mapped2d
coupling.base = two_moons
train.iters = {iters}
train.batch = 256
train.seed = 0
net.lr = 1e-3
eval.n = 500
eval.sources = 10
eval.per_source = 8
eval.nfe = 50
"""
IDENTITY_ITERS = 3000


def _write(path, text):
    path.write_text(text)
    return str(path)


def _src(tmp_path, d=2, n=20, name="src.csv"):
    path = tmp_path / name
    write_table(path, dim_header(d), np.random.default_rng(1).standard_normal((n, d)))
    return str(path)


def _metrics(path):
    rows = [line.split(",") for line in path.read_text().splitlines() if line and not line.startswith("#")]
    assert rows[0] == ["direction", "metric", "value"]
    return {(d, m): float(v) for d, m, v in rows[1:]}


@pytest.fixture(scope="module")
def identity_model(tmp_path_factory):
    root = tmp_path_factory.mktemp("identity")
    cfg = _write(root / "identity.cfg", IDENTITY.format(iters=IDENTITY_ITERS))
    ckpt = root / "model.ckpt"
    assert cli.main(["train", cfg, "--out", str(ckpt)]) == 0
    return cfg, ckpt


@pytest.fixture
def small_model(tmp_path):
    cfg = _write(tmp_path / "toy.cfg", TOY + "train.iters = 5\n")
    ckpt = tmp_path / "toy.ckpt"
    assert cli.main(["train", cfg, "--out", str(ckpt)]) == 0
    return cfg, ckpt


def test_train_writes_checkpoint_loss_csv_and_summary(tmp_path, capsys):
    cfg = _write(tmp_path / "toy.cfg", TOY + "train.iters = 5\n")
    assert cli.main(["train", cfg, "--out", str(tmp_path / "m.ckpt"), "--figures"]) == 0
    out = capsys.readouterr().out
    assert re.match(r"final_loss=\S+ iterations=5 digest=[0-9a-f]{16}", out)
    header, rows = read_table(tmp_path / "m.loss.csv")
    assert header == ["iter", "loss"] and rows.shape == (5, 2)
    assert (tmp_path / "m.loss.png").stat().st_size > 0


def test_train_missing_iters_exits_2_naming_key(tmp_path, capsys):
    cfg = _write(tmp_path / "toy.cfg", TOY)
    assert cli.main(["train", cfg, "--out", str(tmp_path / "m.ckpt")]) == 2
    assert "train.iters" in capsys.readouterr().err
    assert not (tmp_path / "m.ckpt").exists()


def test_train_unknown_key_exits_2(tmp_path):
    cfg = _write(tmp_path / "toy.cfg", TOY + "train.iters = 1\ntrain.colour = red\n")
    assert cli.main(["train", cfg, "--out", str(tmp_path / "m.ckpt")]) == 2


def test_train_zero_iterations_equals_init(tmp_path):
    cfg = _write(tmp_path / "toy.cfg", TOY + "train.iters = 0\n")
    ckpt = tmp_path / "m.ckpt"
    assert cli.main(["train", cfg, "--out", str(ckpt)]) == 0
    init = init_params(2, (16, 16), 4, "z_pred", np.random.default_rng(np.random.SeedSequence(3).spawn(2)[0]))
    sched = BridgeSchedule.brownian(k=2.0)
    assert ckpt.read_bytes() == checkpoint_bytes(init, sched, TransitionVariancePolicy())


def test_sample_both_directions_and_metadata(tmp_path, small_model):
    _, ckpt = small_model
    src = _src(tmp_path)
    for direction in ("forward", "backward"):
        out = tmp_path / f"{direction}.csv"
        assert cli.main(["sample", str(ckpt), "--direction", direction, "--nfe", "20", "--in", src,
                         "--out", str(out)]) == 0
        text = out.read_text()
        for key in ("seed", "nfe", "eta", "direction", "checkpoint"):
            assert f"# {key}=" in text
        header, rows = read_table(out)
        assert header == ["dim0", "dim1"] and rows.shape == (20, 2) and np.all(np.isfinite(rows))


def test_sample_eta_zero_is_byte_identical(tmp_path, small_model):
    _, ckpt = small_model
    src = _src(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        assert cli.main(["sample", str(ckpt), "--direction", "forward", "--nfe", "20", "--eta", "0", "--seed",
                         "4", "--in", src, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sample_flags_override_config(tmp_path, small_model):
    _, ckpt = small_model
    cfg = _write(tmp_path / "s.cfg", "sample.nfe = 3\nsample.seed = 9\n")
    out = tmp_path / "o.csv"
    assert cli.main(["sample", str(ckpt), "--direction", "forward", "--config", cfg, "--in", _src(tmp_path),
                     "--out", str(out)]) == 2
    assert cli.main(["sample", str(ckpt), "--direction", "forward", "--config", cfg, "--nfe", "10", "--in",
                     _src(tmp_path), "--out", str(out)]) == 0
    assert "# seed=9" in out.read_text()


@pytest.mark.parametrize("args", [["--nfe", "3"], ["--eta", "2"]])
def test_sample_bad_settings_exit_2(tmp_path, small_model, args):
    _, ckpt = small_model
    out = tmp_path / "o.csv"
    assert cli.main(["sample", str(ckpt), "--direction", "forward", *args, "--in", _src(tmp_path),
                     "--out", str(out)]) == 2
    assert not out.exists()


def test_sample_dimension_mismatch_exits_2(tmp_path, small_model):
    _, ckpt = small_model
    assert cli.main(["sample", str(ckpt), "--direction", "forward", "--in", _src(tmp_path, d=3),
                     "--out", str(tmp_path / "o.csv")]) == 2


def test_sample_corrupt_checkpoint_exits_2(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"XDBM" + b"\0" * 40)
    assert cli.main(["sample", str(bad), "--direction", "forward", "--in", _src(tmp_path),
                     "--out", str(tmp_path / "o.csv")]) == 2


def test_sample_trajectory(tmp_path, small_model):
    _, ckpt = small_model
    traj = tmp_path / "traj.csv"
    assert cli.main(["sample", str(ckpt), "--direction", "backward", "--nfe", "10", "--in", _src(tmp_path, n=3),
                     "--out", str(tmp_path / "o.csv"), "--trajectory", str(traj)]) == 0
    header, rows = read_table(traj)
    assert header == ["t", "dim0", "dim1"] and rows.shape == (33, 3)
    assert rows[0, 0] == 1000.0 and rows[-1, 0] == 0.0


def test_verify_doob_exits_0_with_csv_report(capsys):
    assert cli.main(["verify", "doob"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "check,value,threshold,pass"
    assert all(line.endswith(",true") for line in lines[2:])


def test_verify_all_exits_0():
    assert cli.main(["verify", "all"]) == 0


def test_verify_mutations_exit_1(mutation, capsys):
    assert cli.main(["verify", "all"]) == 1
    assert "FAILED:" in capsys.readouterr().err


def test_scaled_backward_variance_fails_kernel_suite(monkeypatch):
    from conftest import MUTATIONS

    MUTATIONS["scaled-backward-variance"](monkeypatch)
    assert cli.main(["verify", "kernels"]) == 1


def test_eval_identity_model(tmp_path, identity_model, capsys):
    cfg, ckpt = identity_model
    out = tmp_path / "metrics.csv"
    assert cli.main(["eval", str(ckpt), cfg, "--out", str(out)]) == 0
    text = out.read_text()
    assert "# checkpoint=" in text
    values = _metrics(out)
    assert set(values) == {(d, m) for d in ("forward", "backward") for m in ("energy", "mse", "diversity")}
    assert values[("forward", "mse")] <= 0.05 and values[("backward", "mse")] <= 0.05
    assert (tmp_path / "metrics.forward.png").exists() and (tmp_path / "metrics.backward.png").exists()


def test_eval_untrained_energy_exceeds_trained(tmp_path, identity_model):
    cfg, ckpt = identity_model
    untrained_cfg = _write(tmp_path / "u.cfg", IDENTITY.format(iters=0))
    untrained = tmp_path / "untrained.ckpt"
    assert cli.main(["train", untrained_cfg, "--out", str(untrained)]) == 0
    energy = {}
    for name, path in (("trained", ckpt), ("untrained", untrained)):
        out = tmp_path / f"{name}.csv"
        assert cli.main(["eval", str(path), cfg, "--metrics", "energy", "--out", str(out)]) == 0
        energy[name] = _metrics(out)
    for direction in ("forward", "backward"):
        assert energy["untrained"][(direction, "energy")] > energy["trained"][(direction, "energy")]


@pytest.mark.parametrize("metrics", ["", " , ", "energy,fid"])
def test_eval_bad_metrics_exit_2(tmp_path, small_model, metrics):
    cfg, ckpt = small_model
    assert cli.main(["eval", str(ckpt), cfg, "--metrics", metrics, "--out", str(tmp_path / "m.csv")]) == 2


def test_plot_point_count_and_determinism(tmp_path):
    pts = Mapped2DCoupling("ring").sample(100, np.random.default_rng(0))[0]
    write_table(tmp_path / "p.csv", dim_header(2), pts)
    assert cli.main(["plot", str(tmp_path / "p.csv"), str(tmp_path / "a.svg")]) == 0
    assert cli.main(["plot", str(tmp_path / "p.csv"), str(tmp_path / "b.svg")]) == 0
    svg = (tmp_path / "a.svg").read_text()
    assert svg.count("<use ") == 100
    assert 'width="640pt"' in svg or 'width="640"' in svg
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_rejects_empty_and_wrong_dimension(tmp_path):
    write_table(tmp_path / "empty.csv", dim_header(2), np.zeros((0, 2)))
    assert cli.main(["plot", str(tmp_path / "empty.csv"), str(tmp_path / "e.svg")]) == 2
    write_table(tmp_path / "three.csv", dim_header(3), np.ones((4, 3)))
    assert cli.main(["plot", str(tmp_path / "three.csv"), str(tmp_path / "t.svg")]) == 2


def test_thread_env_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("BDBM_THREADS", "zero")
    assert cli.main(["verify", "doob"]) == 2
    monkeypatch.setenv("BDBM_THREADS", "2")
    assert cli.main(["verify", "doob"]) == 0


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "bdbm.cli", "verify", "doob"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "check,value,threshold,pass" in res.stdout
