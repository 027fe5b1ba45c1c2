import json
from pathlib import Path

import pytest

from phaselink import cli

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "phaselink" / "configs"
MEASURED = str(CONFIG_DIR / "measured_link.cfg")
UPGRADED = str(CONFIG_DIR / "upgraded_link.cfg")


def run_cli(args):
    return cli.main(args)


class TestLinkBudget:
    def test_csv_schema_and_values(self, capsys):
        assert run_cli(["link-budget", "--config", MEASURED]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == cli.LINK_BUDGET_HEADER
        rows = dict(l.split(",") for l in lines[1:])
        assert float(rows["channel_db"]) == pytest.approx(18.477, abs=1e-3)
        assert abs(float(rows["channel_db"]) - 17.83) < 1.5

    def test_json_format(self, capsys):
        assert run_cli(["link-budget", "--config", MEASURED, "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0 < payload["eta_total"] < 1.0
        assert set(payload["breakdown_db"]) == {
            "geometric", "atmospheric", "conversion", "fiber", "adapter", "receiver", "detector",
        }

    def test_regime_violation_exit_code(self, tmp_path, capsys):
        text = Path(MEASURED).read_text()
        text = text.replace("geometry.d_fs = 1400.0", "geometry.d_fs = 500000.0")
        bad = tmp_path / "beyond.cfg"
        bad.write_text(text)
        assert run_cli(["link-budget", "--config", str(bad)]) == cli.EXIT_REGIME
        assert "regime" in capsys.readouterr().err.lower()

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "broken.cfg"
        bad.write_text("beam.w0 = 0.001\n")
        assert run_cli(["link-budget", "--config", str(bad)]) == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_code(self):
        assert run_cli(["link-budget", "--config", "/no/such.cfg"]) == cli.EXIT_CONFIG


class TestRateSweep:
    def test_csv_header_golden(self, capsys):
        assert run_cli(["rate-sweep", "--config", MEASURED, "--grid", "0:2000:1000"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "d_fs_m,key_gen_rate_bps,cs_raw,q_mu,e_mu,q1,e1,collapsed"
        assert len(lines) == 4

    def test_empty_grid_header_only(self, capsys):
        assert run_cli(["rate-sweep", "--config", MEASURED, "--grid", "10:5:10"]) == 0
        out = capsys.readouterr().out
        assert out == "d_fs_m,key_gen_rate_bps,cs_raw,q_mu,e_mu,q1,e1,collapsed\n"

    def test_upgraded_reaches_30km(self, capsys):
        assert run_cli(["rate-sweep", "--config", UPGRADED]) == 0
        lines = capsys.readouterr().out.splitlines()[1:]
        positive = [float(l.split(",")[0]) for l in lines if float(l.split(",")[1]) > 0]
        assert max(positive) >= 30_000.0

    def test_matches_standalone_evaluation(self, capsys):
        # 1.4 km sweep row within 2% of the direct formula evaluation
        assert run_cli(["rate-sweep", "--config", MEASURED, "--grid", "1400:1400:100"]) == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        from phaselink.config import load_config
        from phaselink.optics import transmittance
        from phaselink.rates import decoy_estimate, forward_gains, secrecy_capacity

        cfg = load_config(MEASURED)
        eta = transmittance(
            cfg.geometry, cfg.atmosphere, cfg.beam, cfg.detector.eta_b, cfg.detector.eta_d
        ).eta_total
        obs = forward_gains(eta, cfg.source, cfg.detector)
        est = decoy_estimate(obs, cfg.source)
        cs = secrecy_capacity(obs, est, cfg.source, cfg.detector)
        rate = cs.cs_per_pulse * cfg.source.rep_rate * cfg.source.signal_fraction
        assert float(row[1]) == pytest.approx(rate, rel=0.02)


class TestSimulate:
    def test_csv_schema(self, capsys):
        assert run_cli(["simulate", "--config", MEASURED]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "class,sent,clicked,errored,gain,qber,se_gain,se_qber"
        assert [l.split(",")[0] for l in lines[1:]] == ["signal", "decoy", "vacuum"]


class TestSession:
    def test_session_runs_and_persists(self, tmp_path, capsys):
        out = tmp_path / "session.csv"
        cfg = tmp_path / "tiny.cfg"
        text = Path(CONFIG_DIR / "desk_session.cfg").read_text()
        text = text.replace("protocol.n_frames = 142", "protocol.n_frames = 3")
        text = text.replace("protocol.spread_ratio = 64", "protocol.spread_ratio = 8")
        cfg.write_text(text)
        assert run_cli(["session", "--config", str(cfg), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("qber,comm_rate,key_gen_rate")
        record = json.loads(Path(str(out) + ".record.json").read_text())
        assert record["scenario_id"] == "tiny"
        assert len(record["config_hash"]) == 64
        assert record["tables"]["output"] == out.read_text()

    def test_reruns_byte_identical(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        text = Path(CONFIG_DIR / "desk_session.cfg").read_text()
        text = text.replace("protocol.n_frames = 142", "protocol.n_frames = 3")
        text = text.replace("protocol.spread_ratio = 64", "protocol.spread_ratio = 8")
        cfg.write_text(text)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(["session", "--config", str(cfg), "--out", str(out1)]) == 0
        assert run_cli(["session", "--config", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        rec1 = json.loads(Path(str(out1) + ".record.json").read_text())
        rec2 = json.loads(Path(str(out2) + ".record.json").read_text())
        assert rec1["tables"] == rec2["tables"]

    def test_seed_override_changes_output(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        text = Path(CONFIG_DIR / "desk_session.cfg").read_text()
        text = text.replace("protocol.n_frames = 142", "protocol.n_frames = 3")
        text = text.replace("protocol.spread_ratio = 64", "protocol.spread_ratio = 8")
        cfg.write_text(text)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(["session", "--config", str(cfg), "--out", str(out1)]) == 0
        assert run_cli(["session", "--config", str(cfg), "--seed", "99", "--out", str(out2)]) == 0
        assert out1.read_bytes() != out2.read_bytes()

    def test_abort_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "noisy.cfg"
        text = Path(CONFIG_DIR / "desk_session.cfg").read_text()
        text = text.replace("protocol.n_frames = 142", "protocol.n_frames = 3")
        text = text.replace("protocol.spread_ratio = 64", "protocol.spread_ratio = 8")
        text = text.replace("detector.e_mis = 0.0", "detector.e_mis = 0.2")
        cfg.write_text(text)
        assert run_cli(["session", "--config", str(cfg)]) == cli.EXIT_ABORT
        assert "abort" in capsys.readouterr().err.lower()
