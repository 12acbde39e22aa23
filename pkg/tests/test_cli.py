"""CLI tests: config parsing/serialization, runners, exit codes."""

import dataclasses
import json
import shutil
import subprocess

import numpy as np
import pytest

from noisegan import cli, game
from noisegan.cli import ConfigError, ExperimentConfig, parse_config, serialize
from noisegan.game import TrainingDiverged, TrainingLog, TurnRecord


# --------------------------------------------------------------- parsing


def test_preset_defaults_round_trip():
    for preset in cli.PRESETS:
        cfg = cli._preset_defaults(preset)
        assert parse_config(serialize(cfg)) == cfg


def test_minimal_config_applies_preset_defaults():
    cfg = parse_config("preset: SPATIAL_1USE\n")
    assert cfg.generator == "FULL_SOFTMAX"
    assert cfg.target_table == (0.55, 0.2, 0.15, 0.1)
    assert cfg.game == {"max_turns": 300, "fidelity_threshold": 2.0}
    assert cfg.seed == 7 and cfg.repetitions == 10
    assert cfg.output_dir == "runs/spatial_1use"


def test_config_overrides_merge_into_defaults():
    cfg = parse_config(
        "preset: SPATIAL_2USE_CORRELATED\n"
        "seed: 3\n"
        "output_dir: out/corr\n"
        "target:\n"
        "  prior: [0.7, 0.1, 0.1, 0.1]\n"
        "  mu: 0.25\n"
        "game:\n"
        "  max_turns: 50\n"
    )
    assert cfg.seed == 3
    assert cfg.output_dir == "out/corr"
    assert cfg.target_prior == (0.7, 0.1, 0.1, 0.1)
    assert cfg.target_mu == 0.25
    # unspecified game keys keep their preset values
    assert cfg.game == {"max_turns": 50, "fidelity_threshold": 2.0}


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2: unknown key bogus"):
        parse_config("preset: SPATIAL_1USE\nbogus: 1\n")
    with pytest.raises(ConfigError, match="line 3: duplicate key seed"):
        parse_config("preset: SPATIAL_1USE\nseed: 1\nseed: 2\n")
    with pytest.raises(ConfigError, match="line 2: seed must be of type int"):
        parse_config("preset: SPATIAL_1USE\nseed: noisy\n")
    with pytest.raises(ConfigError, match="line 1: unknown preset 'SPOOKY'"):
        parse_config("preset: SPOOKY\n")
    with pytest.raises(
        ConfigError,
        match="line 3: target.table sums to 0.99, must be a normalized",
    ):
        parse_config(
            "preset: SPATIAL_1USE\ntarget:\n  table: [0.5, 0.4, 0.05, 0.04]\n"
        )
    with pytest.raises(ConfigError, match="line 3: unknown key game.step_size"):
        parse_config("preset: SPATIAL_1USE\ngame:\n  step_size: 0.1\n")
    with pytest.raises(ConfigError, match="target.mu must lie"):
        parse_config(
            "preset: SPATIAL_2USE_CORRELATED\ntarget:\n  mu: 1.5\n"
        )
    with pytest.raises(ConfigError, match="unknown generator"):
        parse_config("preset: SPATIAL_1USE\ngenerator: GREEDY\n")


def test_parse_rejects_malformed_documents():
    with pytest.raises(ConfigError, match="empty config"):
        parse_config("")
    with pytest.raises(ConfigError, match="not valid YAML"):
        parse_config("preset: [unclosed\n")
    with pytest.raises(ConfigError, match="must be a mapping"):
        parse_config("- just\n- a\n- list\n")
    with pytest.raises(ConfigError, match="missing required key: preset"):
        parse_config("seed: 1\n")


def test_validate_preset_requirements():
    with pytest.raises(ConfigError, match="requires the MU_ONLY generator"):
        parse_config("preset: TEMPORAL_MU_ONLY_N_SWEEP\ngenerator: FULL_SOFTMAX\n")
    with pytest.raises(ConfigError, match="needs 4 entries for m=2"):
        parse_config(
            "preset: METROLOGY_TABLE\ntarget:\n  phase_dist: [0.5, 0.5]\n"
        )
    with pytest.raises(ConfigError, match="unknown preset"):
        ExperimentConfig(preset="NOT_A_PRESET")


def test_seeded_rng_is_deterministic():
    a = cli.seeded_rng(5).uniform(size=4)
    b = cli.seeded_rng(5).uniform(size=4)
    c = cli.seeded_rng(6).uniform(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------- runners


def gram_config(tmp_path, **kw):
    cfg = cli._preset_defaults("GRAM_ANALYSIS")
    return dataclasses.replace(cfg, output_dir=str(tmp_path / "gram"), **kw)


def tiny_spatial_config(tmp_path, name="a", reps=1, turns=3):
    cfg = cli._preset_defaults("SPATIAL_1USE")
    return dataclasses.replace(
        cfg,
        repetitions=reps,
        output_dir=str(tmp_path / name),
        game={"max_turns": turns, "fidelity_threshold": 2.0},
    )


def test_gram_analysis_run(tmp_path):
    cfg = gram_config(tmp_path)
    assert cli.run_experiment(cfg) == 0
    summary = json.loads((tmp_path / "gram" / "summary.json").read_text())
    assert summary["preset"] == "GRAM_ANALYSIS"
    rows = {r["n"]: r for r in summary["rows"]}
    assert sorted(rows) == [1, 2, 4, 8]
    # m=2, n=1: zero mode, not identifiable
    assert rows[1]["min_eigenvalue"] == 0.0
    assert rows[1]["verdict"] == "not identifiable"
    assert rows[1]["identifiable"] is False
    # boundary n = 2^{m-1} = 2 and beyond: identifiable
    for n in (2, 4, 8):
        assert rows[n]["min_eigenvalue"] > 0.0
        assert rows[n]["verdict"] == "identifiable"
    assert rows[2]["eigenvalues"] == [1.5, 1.0, 0.5, 1.0]


def test_spatial_run_writes_expected_files(tmp_path):
    cfg = tiny_spatial_config(tmp_path, reps=2, turns=3)
    assert cli.run_experiment(cfg) == 0
    outdir = tmp_path / "a"
    for rep in (0, 1):
        lines = (outdir / f"metrics_rep{rep}.jsonl").read_text().splitlines()
        assert len(lines) == 4  # turns 0..3
        for turn, line in enumerate(lines):
            rec = json.loads(line)
            assert list(rec) == ["turn", "score", "gen_objective", "kl", "avg_fidelity"]
            assert rec["turn"] == turn
        dist = json.loads((outdir / f"distributions_rep{rep}.json").read_text())
        assert list(dist) == ["target", "learnt", "kl", "choi_fidelity"]
        assert dist["target"] == [0.55, 0.2, 0.15, 0.1]
        assert abs(sum(dist["learnt"]) - 1.0) < 1e-12
    summary = json.loads((outdir / "summary.json").read_text())
    assert [r["rep"] for r in summary["rows"]] == [0, 1]
    assert [r["seed"] for r in summary["rows"]] == [7, 8]  # base seed + rep
    assert all(r["stop_reason"] == "max_turns" for r in summary["rows"])


def test_repeated_run_is_bit_identical(tmp_path):
    cfg_a = tiny_spatial_config(tmp_path, "a", reps=2, turns=3)
    cfg_b = dataclasses.replace(cfg_a, output_dir=str(tmp_path / "b"))
    assert cli.run_experiment(cfg_a) == 0
    assert cli.run_experiment(cfg_b) == 0
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b and len(files_a) == 5
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes()


def test_divergence_writes_partial_metrics_and_exits_2(tmp_path, monkeypatch):
    def fake_train(*args, **kwargs):
        log = TrainingLog(
            records=[TurnRecord(0, float("nan"), 0.0, 0.1, 0.2, 0.0)],
            stop_reason="diverged",
        )
        raise TrainingDiverged(0, log)

    monkeypatch.setattr(game, "train", fake_train)
    cfg = tiny_spatial_config(tmp_path)
    assert cli.run_experiment(cfg) == 2
    lines = (tmp_path / "a" / "metrics_rep0.jsonl").read_text().splitlines()
    assert len(lines) == 1  # the partial log survived the failure
    assert json.loads(lines[0])["turn"] == 0


def test_unwritable_output_exits_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = dataclasses.replace(
        cli._preset_defaults("GRAM_ANALYSIS"), output_dir=str(blocker / "sub")
    )
    assert cli.run_experiment(cfg) == 3


def test_bad_game_override_exits_1(tmp_path):
    cfg = tiny_spatial_config(tmp_path)
    cfg = dataclasses.replace(cfg, game={**cfg.game, "learning_rate_D": 5.0})
    assert cli.run_experiment(cfg) == 1


# ------------------------------------------------------------------- main


def test_main_runs_preset_with_overrides(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(
        [
            "spatial-1use",
            "--output", str(out),
            "--seed", "3",
            "--max-turns", "2",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 3
    assert summary["rows"][0]["turns"] == 2
    # --max-turns replaces only that key; the preset threshold remains
    lines = (out / "metrics_rep0.jsonl").read_text().splitlines()
    assert len(lines) == 3


def test_main_missing_config_exits_3(tmp_path, capsys):
    code = cli.main(["spatial-1use", "--config", str(tmp_path / "nope.yaml")])
    assert code == 3
    assert "I/O error" in capsys.readouterr().err


def test_main_config_preset_mismatch_exits_1(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("preset: GRAM_ANALYSIS\n")
    code = cli.main(["spatial-1use", "--config", str(conf)])
    assert code == 1
    assert "config is for GRAM_ANALYSIS" in capsys.readouterr().err


def test_main_malformed_config_exits_1(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("preset: SPATIAL_1USE\ntarget:\n  table: [0.9, 0.2]\n")
    code = cli.main(["spatial-1use", "--config", str(conf)])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_main_config_file_drives_run(tmp_path):
    conf = tmp_path / "c.yaml"
    conf.write_text(
        "preset: GRAM_ANALYSIS\n"
        f"output_dir: {tmp_path / 'g'}\n"
        "metrology:\n"
        "  m: 3\n"
        "  n_values: [4]\n"
    )
    assert cli.main(["gram-analysis", "--config", str(conf)]) == 0
    summary = json.loads((tmp_path / "g" / "summary.json").read_text())
    assert summary["rows"][0]["m"] == 3
    assert summary["rows"][0]["n"] == 4
    assert summary["rows"][0]["identifiable"] is True


@pytest.mark.skipif(shutil.which("noisegan") is None, reason="script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(
        ["noisegan", "gram-analysis", "--output", str(tmp_path / "g")],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert (tmp_path / "g" / "summary.json").exists()
