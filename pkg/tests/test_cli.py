import json
import os

import numpy as np
import pytest

from prefnav import cli


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """Tiny end-to-end CLI artifacts shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    dataset = root / "frames.jsonl"
    rc = cli.main(["gen-dataset", "--n", "400", "--out", str(dataset), "--seed", "0"])
    assert rc == 0
    rc = cli.main(["train-vae", "--dataset", str(dataset), "--epochs", "2",
                   "--out", str(root / "models"), "--seed", "0"])
    assert rc == 0
    vae = root / "models" / "vae.npz"
    rc = cli.main(["train-policy", "--vae", str(vae), "--max-steps", "150", "--warmup", "100",
                   "--eval-every", "100000", "--out", str(root / "policy"), "--seed", "0"])
    assert rc == 0
    return {"root": root, "dataset": dataset, "vae": vae,
            "policy": root / "policy" / "policy.npz"}


def write_traj(path, rows):
    path.write_text(json.dumps(rows))


class TestFrechetCommand:
    def test_prints_metric(self, tmp_path, capsys):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        write_traj(a, [[i * 0.1, i * 0.5, 0.0] for i in range(20)])
        write_traj(b, [[i * 0.1, i * 0.5, 0.3] for i in range(20)])
        rc = cli.main(["frechet", "--a", str(a), "--b", str(b)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "F_full" in out and "t_star" in out and "f(t_star)" in out

    def test_curve_csv(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        write_traj(a, [[i * 0.1, i * 0.5, 0.0] for i in range(10)])
        write_traj(b, [[i * 0.1, i * 0.5, 0.1] for i in range(10)])
        out = tmp_path / "curve.csv"
        rc = cli.main(["frechet", "--a", str(a), "--b", str(b), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,f"
        assert len(lines) == 101


class TestUsageErrors:
    def test_unknown_flag_exits_1(self, capsys):
        assert cli.main(["frechet", "--nope", "x"]) == 1

    def test_unknown_command_exits_1(self):
        assert cli.main(["transmogrify"]) == 1

    def test_vae_ha_without_demos_rejected(self, tmp_path, capsys):
        rc = cli.main(["train-policy", "--variant", "vae-ha", "--no-demos",
                       "--vae", str(tmp_path / "missing.npz")])
        assert rc == 1
        assert "requires demonstrations" in capsys.readouterr().err

    def test_missing_file_is_runtime_error(self, capsys):
        rc = cli.main(["train-vae", "--dataset", "/nonexistent/frames.jsonl"])
        assert rc == 2

    def test_help_available_everywhere(self, capsys):
        for cmd in ["gen-dataset", "train-vae", "train-predictor", "train-policy",
                    "rollout", "evaluate", "frechet", "serve"]:
            with pytest.raises(SystemExit) as e:
                cli.build_parser().parse_args([cmd, "--help"])
            assert e.value.code == 0
            assert "--seed" in capsys.readouterr().out


class TestPipelineCommands:
    def test_artifacts_exist(self, artifacts):
        assert artifacts["vae"].exists()
        assert artifacts["policy"].exists()
        assert (artifacts["root"] / "policy" / "training_log.csv").exists()
        assert (artifacts["root"] / "policy" / "resolved_config.json").exists()

    def test_dataset_stats_sidecar(self, artifacts):
        stats = json.loads((artifacts["root"] / "frames.jsonl.stats.json").read_text())
        assert stats["n_frames"] == 400
        assert stats["mean_baseline_mse"] > 0

    def test_rollout_deterministic(self, artifacts, tmp_path, capsys):
        outs = []
        for tag in ("r1", "r2"):
            out = tmp_path / f"{tag}.jsonl"
            rc = cli.main(["rollout", "--policy", str(artifacts["policy"]),
                           "--vae", str(artifacts["vae"]), "--seed", "7", "--out", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        header = json.loads(outs[0].decode().splitlines()[0])
        assert header["kind"] == "init" and "seed" in header

    def test_evaluate_writes_reports_and_rates_sum(self, artifacts, tmp_path, capsys):
        out = tmp_path / "eval"
        rc = cli.main(["evaluate", "--policy", str(artifacts["policy"]),
                       "--vae", str(artifacts["vae"]), "--n", "4", "--seed", "1",
                       "--demos", "none", "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert report["scenarios"]
        for sc in report["scenarios"]:
            total = sc["success_rate"] + sc["collision_rate"] + sc["timeout_rate"]
            assert total == pytest.approx(1.0, abs=1e-12)
        assert (out / "eval_rates.csv").exists()

    def test_predictor_training_command(self, artifacts):
        rc = cli.main(["train-predictor", "--dataset", str(artifacts["dataset"]),
                       "--vae", str(artifacts["vae"]), "--epochs", "1",
                       "--out", str(artifacts["root"] / "models"), "--seed", "0"])
        assert rc == 0
        assert (artifacts["root"] / "models" / "predictor.npz").exists()
