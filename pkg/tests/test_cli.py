import json
import os
import shutil

import pytest

from fracpe.cli import main
from fracpe.config import CONFIG_SCHEMA, load_config, ConfigError


def _write_cfg(path, **kw):
    base = {"experiment": "simulate", "seed": 1,
            "truncation": {"M_h": 3, "K_v": 2},
            "noise": {"truncation": 20},
            "dt": 0.01, "horizon": 0.5,
            "simulate": {"rho": 1.0, "state_seed": 2, "snapshot_every": 25}}
    base.update(kw)
    path.write_text(json.dumps(base))
    return path


class TestSimulate:
    def test_run_writes_artifacts_and_reruns_identically(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out1 / "manifest.json").exists()
        assert (out1 / "energy.ndjson").read_bytes() == \
            (out2 / "energy.ndjson").read_bytes()

    def test_resume_split_is_bit_exact(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        full = tmp_path / "full"
        main(["simulate", "--config", str(cfg), "--out", str(full)])
        broken = tmp_path / "broken"
        shutil.copytree(full, broken)
        os.remove(broken / "state_00000050.snap")
        lines = (broken / "energy.ndjson").read_text().splitlines(keepends=True)
        (broken / "energy.ndjson").write_text("".join(lines[:26]))
        assert main(["simulate", "--config", str(cfg),
                     "--resume", str(broken)]) == 0
        assert (broken / "energy.ndjson").read_bytes() == \
            (full / "energy.ndjson").read_bytes()
        assert (broken / "state_00000050.snap").read_bytes() == \
            (full / "state_00000050.snap").read_bytes()

    def test_resume_refuses_edited_manifest(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        run = tmp_path / "run"
        main(["simulate", "--config", str(cfg), "--out", str(run)])
        man = json.loads((run / "manifest.json").read_text())
        man["config"]["dt"] = 0.02
        (run / "manifest.json").write_text(json.dumps(man))
        assert main(["simulate", "--config", str(cfg),
                     "--resume", str(run)]) == 1

    def test_resume_refuses_missing_snapshot(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        run = tmp_path / "run"
        main(["simulate", "--config", str(cfg), "--out", str(run)])
        for f in run.iterdir():
            if f.suffix == ".snap":
                f.unlink()
        assert main(["simulate", "--config", str(cfg),
                     "--resume", str(run)]) == 1

    def test_cfl_violation_exits_one_with_suggestion(self, tmp_path, capsys):
        cfg = _write_cfg(tmp_path / "sim.json", dt=0.1, horizon=1.0,
                         simulate={"rho": 300.0, "state_seed": 2,
                                   "snapshot_every": 5})
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "r")]) == 1
        err = capsys.readouterr().err
        assert "suggested dt" in err


class TestOtherExperiments:
    def test_check_noise_default_passes(self, tmp_path):
        cfg = tmp_path / "cn.json"
        cfg.write_text(json.dumps({"experiment": "check-noise"}))
        out = tmp_path / "out"
        assert main(["check-noise", "--config", str(cfg),
                     "--out", str(out)]) == 0
        rows = [json.loads(l) for l in
                (out / "trace.ndjson").read_text().splitlines()]
        assert all(r["passed"] for r in rows)

    def test_check_noise_slow_decay_is_a_finding(self, tmp_path):
        cfg = tmp_path / "cn.json"
        cfg.write_text(json.dumps({"experiment": "check-noise",
                                   "noise": {"decay_p": 8.0}}))
        assert main(["check-noise", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == 2

    def test_gen_fbm_writes_path_and_sidecar(self, tmp_path):
        cfg = tmp_path / "g.json"
        cfg.write_text(json.dumps({"experiment": "gen-fbm", "seed": 5,
                                   "fbm": {"H": 0.7, "dt": 1 / 64, "n": 65,
                                           "two_sided": True}}))
        out = tmp_path / "out"
        assert main(["gen-fbm", "--config", str(cfg), "--out", str(out)]) == 0
        side = json.loads((out / "fbm.json").read_text())
        assert side["H"] == 0.7 and side["t0"] == -1.0

    def test_ou_stats_holder(self, tmp_path):
        cfg = tmp_path / "o.json"
        cfg.write_text(json.dumps({
            "experiment": "ou-stats", "seed": 3,
            "truncation": {"M_h": 3, "K_v": 2},
            "noise": {"truncation": 15, "beta_shift": 1.0},
            "ou_stats": {"kind": "holder", "n_samples": 100,
                         "sample_dt": 1 / 128}}))
        out = tmp_path / "out"
        assert main(["ou-stats", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "holder.ndjson").exists()

    def test_pullback_mini(self, tmp_path):
        cfg = tmp_path / "p.json"
        cfg.write_text(json.dumps({
            "experiment": "pullback", "seed": 0,
            "truncation": {"M_h": 3, "K_v": 2},
            "noise": {"truncation": 15}, "dt": 0.02,
            "pullback": {"start_times": [-2.0, -4.0, -8.0], "rho": 1.0,
                         "n_states": 2, "n_seeds": 1}}))
        out = tmp_path / "out"
        assert main(["pullback", "--config", str(cfg), "--out", str(out)]) in (0, 2)
        rows = [json.loads(l) for l in
                (out / "pullback.ndjson").read_text().splitlines()]
        assert {r["s_start"] for r in rows} == {-2.0, -4.0, -8.0}
        header = (out / "summary.csv").read_text().splitlines()[0]
        assert header == "s_start,diameter,entry_time,r_estimate,c_star,manifest_hash"

    def test_contract_mini(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "experiment": "contract", "seed": 0,
            "truncation": {"M_h": 3, "K_v": 2},
            "noise": {"truncation": 15}, "dt": 0.02, "horizon": 0.5,
            "contract": {"perturbation_scales": [1.0, 1e-2], "n_seeds": 1}}))
        out = tmp_path / "out"
        assert main(["contract", "--config", str(cfg), "--out", str(out)]) == 0

    def test_absorb_mini(self, tmp_path):
        cfg = tmp_path / "a.json"
        cfg.write_text(json.dumps({
            "experiment": "absorb", "seed": 0,
            "truncation": {"M_h": 3, "K_v": 2},
            "noise": {"truncation": 15}, "dt": 0.02, "horizon": 8.0,
            "absorb": {"rhos": [0.5, 1.0]}}))
        out = tmp_path / "out"
        assert main(["absorb", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "absorb.ndjson").exists()


class TestReport:
    def test_renders_figures_next_to_delimited_output(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        run = tmp_path / "run"
        main(["simulate", "--config", str(cfg), "--out", str(run)])
        assert main(["report", str(run)]) == 0
        assert (run / "energy.png").exists()
        assert (run / "energy.csv").exists()

    def test_report_on_empty_dir_errors(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", str(empty)]) == 1


class TestConfig:
    def test_schema_violation_is_line_precise(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n "experiment": "simulate",\n "dt": -3\n}\n')
        assert main(["simulate", "--config", str(bad)]) == 1
        assert "bad.json:3" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "simulate", "bogus": 1}))
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_subcommand_mismatch_rejected(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        assert main(["pullback", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 1

    def test_seed_override(self, tmp_path):
        cfg = _write_cfg(tmp_path / "sim.json")
        out = tmp_path / "o"
        main(["simulate", "--config", str(cfg), "--out", str(out),
              "--seed", "9"])
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["seed"] == 9

    def test_env_out_root(self, tmp_path, monkeypatch):
        cfg = _write_cfg(tmp_path / "sim.json")
        monkeypatch.setenv("FRACPE_OUT", str(tmp_path / "root"))
        main(["simulate", "--config", str(cfg)])
        assert (tmp_path / "root" / "simulate" / "energy.ndjson").exists()

    def test_env_threads(self, tmp_path, monkeypatch):
        cfg = _write_cfg(tmp_path / "sim.json")
        monkeypatch.setenv("FRACPE_THREADS", "2")
        out = tmp_path / "o"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["threads"] == 2

    def test_published_schema_matches(self):
        here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        with open(os.path.join(here, "docs", "config-schema.json")) as fh:
            assert json.load(fh) == json.loads(
                json.dumps(CONFIG_SCHEMA, sort_keys=True))
