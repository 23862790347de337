import yaml

from tacfeed.cli import main

SMALL = dict(
    num_antennas=16,
    fft_size=128,
    num_users=2,
    num_taps=3,
    aod_base_deg=[20.0, 60.0, -45.0],
    delay_spread=9,
    traced_support=[0, 4, 8],
    num_rs=5,
    total_feedback=3,
    se_num_tones=8,
)


def write_small(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return str(path)


def test_simulate_writes_outputs(tmp_path, capsys):
    cfg = write_small(tmp_path)
    out = tmp_path / "run.csv"
    code = main(
        ["simulate", "--config", cfg, "--seeds", "0,1", "--out", str(out)]
    )
    assert code == 0
    assert out.exists() and out.with_suffix(".json").exists()
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * SMALL["num_rs"]
    assert "wrote 10 records" in capsys.readouterr().out


def test_simulate_override_and_seed_range(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "dumb.csv"
    code = main(
        [
            "simulate",
            "--config",
            cfg,
            "--seeds",
            "0:2",
            "--out",
            str(out),
            "--override",
            "mode=dumb",
            "--override",
            "snr_db=0",
        ]
    )
    assert code == 0
    sidecar = yaml.safe_load(out.with_suffix(".json").read_text())
    assert sidecar["config"]["mode"] == "dumb"
    assert sidecar["config"]["snr_db"] == 0


def test_bad_override_exits_2(tmp_path, capsys):
    cfg = write_small(tmp_path)
    code = main(
        [
            "simulate",
            "--config",
            cfg,
            "--seeds",
            "0",
            "--out",
            str(tmp_path / "x.csv"),
            "--override",
            "warp_factor=9",
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_seed_spec_exits_2(tmp_path):
    cfg = write_small(tmp_path)
    assert main(["simulate", "--config", cfg, "--seeds", "7:3", "--out", "x.csv"]) == 2
    assert main(["simulate", "--config", cfg, "--seeds", "a,b", "--out", "x.csv"]) == 2


def test_infeasible_scenario_exits_2(tmp_path):
    cfg = write_small(tmp_path)
    code = main(
        [
            "simulate",
            "--config",
            cfg,
            "--seeds",
            "0",
            "--out",
            str(tmp_path / "x.csv"),
            "--override",
            "delta_mode=fixed",
            "--override",
            "delta_fixed=9",
        ]
    )
    assert code == 2


def test_sweep_combined_form(tmp_path):
    cfg = write_small(tmp_path)
    out_dir = tmp_path / "sweep"
    code = main(
        [
            "sweep",
            "--config",
            cfg,
            "--param",
            "total_feedback=1,3",
            "--out-dir",
            str(out_dir),
        ]
    )
    assert code == 0
    assert (out_dir / "total_feedback_1.csv").exists()
    assert (out_dir / "total_feedback_3.csv").exists()
    assert (out_dir / "total_feedback_3.json").exists()


def test_sweep_split_form(tmp_path):
    cfg = write_small(tmp_path)
    out_dir = tmp_path / "sweep2"
    code = main(
        [
            "sweep",
            "--config",
            cfg,
            "--param",
            "snr_db",
            "--values",
            "0,10",
            "--out-dir",
            str(out_dir),
        ]
    )
    assert code == 0
    assert (out_dir / "snr_db_0.csv").exists()
    assert (out_dir / "snr_db_10.csv").exists()


def test_sweep_value_spec_errors(tmp_path):
    cfg = write_small(tmp_path)
    args = ["sweep", "--config", cfg, "--out-dir", str(tmp_path / "s")]
    assert main(args + ["--param", "snr_db"]) == 2
    assert main(args + ["--param", "snr_db=1,2", "--values", "3,4"]) == 2
    assert main(args + ["--param", "warp_factor=1"]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "ok" in out.lower() or "pass" in out.lower()
