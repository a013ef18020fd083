import numpy as np
import pytest

from antisymrnn.cli import main
from antisymrnn.core import write_matrix_csv

SUBCOMMANDS = ["eig", "simulate", "params", "gradcheck", "train", "spectrum"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_params(capsys):
    assert run(capsys, "params", "--cell", "antisym_diffusion", "--n", "128", "--m", "1", "--classes", "10") \
        == (0, "9674\n", "")


def test_eig_rotation(tmp_path, capsys):
    write_matrix_csv([[0, 1], [-1, 0]], tmp_path / "rot.csv")
    code, out, _ = run(capsys, "eig", "--matrix", str(tmp_path / "rot.csv"))
    assert code == 0
    assert out.splitlines() == ["re,im,modulus", "0,1,1", "0,-1,1"]


def test_eig_to_file(tmp_path, capsys):
    write_matrix_csv(np.diag([2.0, 3.0]), tmp_path / "d.csv")
    assert run(capsys, "eig", "--matrix", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o.csv"))[0] == 0
    assert (tmp_path / "o.csv").read_text().splitlines()[1:] == ["3,0,3", "2,0,2"]


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--cell", "lstm", "--n", "8", "--m", "3", "--t", "12", "--seed", "1")
    assert code == 0
    kind, err = out.splitlines()[1].split(",")
    assert kind == "lstm" and float(err) < 1e-6


@pytest.mark.parametrize("argv", [
    ["params", "--cell", "gru", "--n", "4", "--m", "1", "--classes", "2"],
    ["params", "--cell", "lstm", "--n", "4", "--m", "1"],
    ["params", "--cell", "lstm", "--n", "4", "--m", "1", "--classes", "2", "--bogus", "1"],
    ["eig", "--matrix", "/nonexistent.csv"],
    ["frobnicate"],
    ["params", "--cell", "lstm", "--n", "4", "--m", "1", "--classes", "2", "--threads", "0"],
])
def test_validation_errors(argv, capsys):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert len(err.strip().splitlines()) == 1


def test_eig_nonfinite_matrix(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("1,nan\n0,1\n")
    assert run(capsys, "eig", "--matrix", str(tmp_path / "m.csv"))[0] == 1


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    import antisymrnn.spectral as spectral

    monkeypatch.setattr(spectral, "eigvals_real", lambda a, t, s: (np.zeros(2), np.zeros(2), False))
    write_matrix_csv(np.eye(2), tmp_path / "m.csv")
    code, _, err = run(capsys, "eig", "--matrix", str(tmp_path / "m.csv"))
    assert code == 2 and err.startswith("numerical failure")


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help(sub, capsys):
    with pytest.raises(SystemExit) as info:
        main([sub, "--help"])
    assert info.value.code == 0
    assert "--threads" in capsys.readouterr().out


def test_simulate(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "simulate", "--system", "imaginary_diffusion", "--epsilon", "0.1", "--gamma", "0.1",
                     "--steps", "4", "--grid", "-1:1:2", "--seed", "1", "--input", "gaussian", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "traj_id,t,h0,h1" and len(lines) == 1 + 4 * 5
    assert lines[1] == "0,0,-1,-1"


def write_config(path, **extra):
    values = dict(cell="antisym_gated", n=6, m=4, classes=2, iterations=6, eval_every=3, batch_size=8,
                  dataset="planted", dataset_args="samples=40,t_total=12,signal_steps=2")
    values.update(extra)
    path.write_text("".join(f"{k}={v}\n" for k, v in values.items()))


def test_train_with_override(tmp_path, capsys):
    write_config(tmp_path / "c.txt")
    code, out, _ = run(capsys, "train", "--config", str(tmp_path / "c.txt"), "--iterations", "3",
                       "--checkpoint-out", str(tmp_path / "n.npz"))
    assert code == 0
    assert out.splitlines()[0] == "iteration,train_loss,test_accuracy"
    assert [line.split(",")[0] for line in out.splitlines()[1:]] == ["3"]
    assert (tmp_path / "n.npz").exists()


def test_train_bad_config(tmp_path, capsys):
    write_config(tmp_path / "c.txt", optimizer="adam")
    assert run(capsys, "train", "--config", str(tmp_path / "c.txt"))[0] == 1


def test_train_divergence_exit_code(tmp_path, capsys):
    write_config(tmp_path / "c.txt", cell="antisym", epsilon=1e300, lr=1e300, iterations=5, eval_every=1)
    code, _, err = run(capsys, "train", "--config", str(tmp_path / "c.txt"))
    assert code == 2 and "numerical failure" in err


def test_spectrum(tmp_path, capsys):
    out = tmp_path / "sp.csv"
    code, _, _ = run(capsys, "spectrum", "--cell-list", "lstm,antisym_diffusion", "--gamma-list", "0.01,1",
                     "--t-list", "5,10", "--n", "4", "--epsilon", "0.1", "--sigma-w", "1", "--samples", "2",
                     "--seed", "3", "--m", "2", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0
    assert lines[0] == "kind,gamma,T,sample,mean_modulus,std_modulus,converged"
    assert len(lines) == 1 + 4 + 8
