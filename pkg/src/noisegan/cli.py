"""Experiment runner.

Each preset reproduces one study: single-use learning, correlated
two-use learning (spatial and temporal), the constrained-generator mu
sweep, the mu-only n sweep, the metrology table, and the Gram-matrix
identifiability analysis.

Config files are YAML::

    preset: SPATIAL_2USE_CORRELATED
    seed: 7
    repetitions: 10
    output_dir: runs/corr2
    generator: FULL_SOFTMAX
    target:
      prior: [0.55, 0.2, 0.15, 0.1]
      mu: 0.5
    game:
      max_turns: 400
      fidelity_threshold: 2.0

    # sweep presets add:           # metrology presets add:
    sweep:                         metrology:
      mu_values: [0.0, 0.5, 1.0]     m: 2
      n_values: [2, 3, 4]            n_values: [2, 1]

Unknown keys are rejected with their line number. Every run writes one
metrics file per repetition (line-delimited JSON records with fields
turn, score, gen_objective, kl, avg_fidelity), a distributions dump per
repetition, and a preset summary. Repetition r uses seed (seed + r).

Exit codes: 0 success, 1 config error, 2 training divergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import game as _game
from . import metrology as _metrology
from .channels import CorrelationModel, ProbTable, correlated_table, kl_divergence
from .game import GameConfig, TrainingDiverged, pauli_choi_fidelity

PRESETS = (
    "SPATIAL_1USE",
    "SPATIAL_2USE_CORRELATED",
    "SPATIAL_MU_SWEEP",
    "TEMPORAL_2USE",
    "TEMPORAL_MU_ONLY_N_SWEEP",
    "METROLOGY_TABLE",
    "GRAM_ANALYSIS",
)

_DEFAULT_PRIOR = (0.55, 0.2, 0.15, 0.1)

_GAME_KEYS = (
    "ancilla_count",
    "init_depth",
    "learning_rate_D",
    "learning_rate_G",
    "D_steps_per_turn",
    "G_steps_per_turn",
    "max_turns",
    "fidelity_threshold",
)


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    seed: int = 7
    repetitions: int = 10
    output_dir: str = ""
    generator: str | None = None
    target_table: tuple | None = None
    target_prior: tuple | None = None
    target_mu: float | None = None
    target_phase_dist: tuple | None = None
    game: dict = field(default_factory=dict)
    sweep_mu: tuple | None = None
    sweep_n: tuple | None = None
    metrology_m: int | None = None
    metrology_n: tuple | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.output_dir:
            object.__setattr__(self, "output_dir", f"runs/{self.preset.lower()}")


def _preset_defaults(preset: str) -> "ExperimentConfig":
    base = dict(preset=preset, seed=7, repetitions=10)
    if preset == "SPATIAL_1USE":
        return ExperimentConfig(
            **base,
            generator="FULL_SOFTMAX",
            target_table=_DEFAULT_PRIOR,
            game={"max_turns": 300, "fidelity_threshold": 2.0},
        )
    if preset == "SPATIAL_2USE_CORRELATED":
        return ExperimentConfig(
            **base,
            generator="FULL_SOFTMAX",
            target_prior=_DEFAULT_PRIOR,
            target_mu=0.5,
            game={"max_turns": 400, "fidelity_threshold": 2.0},
        )
    if preset == "SPATIAL_MU_SWEEP":
        base["repetitions"] = 5
        return ExperimentConfig(
            **base,
            generator="FACTORIZED_SOFTMAX",
            target_prior=_DEFAULT_PRIOR,
            sweep_mu=(0.0, 0.25, 0.5, 0.75, 1.0),
            game={"max_turns": 400, "fidelity_threshold": 2.0},
        )
    if preset == "TEMPORAL_2USE":
        return ExperimentConfig(
            **base,
            generator="FULL_SOFTMAX",
            target_prior=_DEFAULT_PRIOR,
            target_mu=0.5,
            game={"max_turns": 400, "fidelity_threshold": 2.0},
        )
    if preset == "TEMPORAL_MU_ONLY_N_SWEEP":
        base["repetitions"] = 5
        return ExperimentConfig(
            **base,
            generator="MU_ONLY",
            target_prior=_DEFAULT_PRIOR,
            target_mu=0.8,
            sweep_n=(2, 3, 4),
            game={"max_turns": 400, "fidelity_threshold": 0.999},
        )
    if preset == "METROLOGY_TABLE":
        return ExperimentConfig(
            **base,
            generator="FULL_SOFTMAX",
            target_phase_dist=(0.4, 0.3, 0.2, 0.1),
            metrology_m=2,
            metrology_n=(2, 1),
            game={"max_turns": 400, "fidelity_threshold": 0.99999},
        )
    base["repetitions"] = 1
    return ExperimentConfig(**base, metrology_m=2, metrology_n=(1, 2, 4, 8))


# ---------------------------------------------------------------------------
# config parsing


def _line(node) -> int:
    return node.start_mark.line + 1


def _value(node):
    return yaml.SafeLoader("").construct_object(node, deep=True)


def _mapping(node, path: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"line {_line(node)}: {path} must be a mapping")
    out = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key in out:
            raise ConfigError(f"line {_line(key_node)}: duplicate key {path}{key}")
        out[key] = (key_node, value_node)
    return out


def _check_keys(entries: dict, allowed, path: str):
    for key, (key_node, _) in entries.items():
        if key not in allowed:
            raise ConfigError(f"line {_line(key_node)}: unknown key {path}{key}")


def _scalar(entries, key, kind, path=""):
    if key not in entries:
        return None
    node = entries[key][1]
    value = _value(node)
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(
            f"line {_line(node)}: {path}{key} must be of type {kind.__name__}"
        )
    return value


def _number_list(entries, key, path=""):
    if key not in entries:
        return None
    node = entries[key][1]
    value = _value(node)
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"line {_line(node)}: {path}{key} must be a list of numbers")
    return tuple(value)


def _prob_vector(entries, key, path=""):
    values = _number_list(entries, key, path)
    if values is None:
        return None
    node = entries[key][1]
    arr = np.array(values, dtype=float)
    if arr.min() < 0 or abs(arr.sum() - 1.0) > 1e-10:
        raise ConfigError(
            f"line {_line(node)}: {path}{key} sums to {arr.sum():g}, must be a "
            "normalized probability vector"
        )
    return tuple(float(v) for v in values)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment config, applying preset defaults."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if root is None:
        raise ConfigError("empty config")
    top = _mapping(root, "")
    _check_keys(
        top,
        (
            "preset",
            "seed",
            "repetitions",
            "output_dir",
            "generator",
            "target",
            "game",
            "sweep",
            "metrology",
        ),
        "",
    )
    preset = _scalar(top, "preset", str)
    if preset is None:
        raise ConfigError("missing required key: preset")
    if preset not in PRESETS:
        raise ConfigError(
            f"line {_line(top['preset'][1])}: unknown preset {preset!r}"
        )
    cfg = _preset_defaults(preset)
    updates: dict = {}
    for key, kind in (("seed", int), ("repetitions", int), ("output_dir", str),
                      ("generator", str)):
        value = _scalar(top, key, kind)
        if value is not None:
            updates[key] = value
    if "generator" in updates and updates["generator"] not in _game.GENERATOR_MODES:
        raise ConfigError(
            f"line {_line(top['generator'][1])}: unknown generator "
            f"{updates['generator']!r}"
        )

    if "target" in top:
        target = _mapping(top["target"][1], "target.")
        _check_keys(target, ("table", "prior", "mu", "phase_dist"), "target.")
        table = _prob_vector(target, "table", "target.")
        prior = _prob_vector(target, "prior", "target.")
        phase = _prob_vector(target, "phase_dist", "target.")
        mu = _scalar(target, "mu", float, "target.")
        if table is not None:
            updates["target_table"] = table
        if prior is not None:
            if len(prior) != 4:
                raise ConfigError("target.prior must have 4 entries")
            updates["target_prior"] = prior
        if phase is not None:
            updates["target_phase_dist"] = phase
        if mu is not None:
            if not 0.0 <= mu <= 1.0:
                raise ConfigError(
                    f"line {_line(target['mu'][1])}: target.mu must lie in [0, 1]"
                )
            updates["target_mu"] = mu

    if "game" in top:
        entries = _mapping(top["game"][1], "game.")
        _check_keys(entries, _GAME_KEYS, "game.")
        merged = dict(cfg.game)
        for key in _GAME_KEYS:
            kind = float if "rate" in key or key == "fidelity_threshold" else int
            value = _scalar(entries, key, kind, "game.")
            if value is not None:
                merged[key] = value
        updates["game"] = merged

    if "sweep" in top:
        entries = _mapping(top["sweep"][1], "sweep.")
        _check_keys(entries, ("mu_values", "n_values"), "sweep.")
        mus = _number_list(entries, "mu_values", "sweep.")
        if mus is not None:
            if any(not 0.0 <= v <= 1.0 for v in mus):
                raise ConfigError("sweep.mu_values must lie in [0, 1]")
            updates["sweep_mu"] = tuple(float(v) for v in mus)
        ns = _number_list(entries, "n_values", "sweep.")
        if ns is not None:
            if any(int(v) != v or v < 1 for v in ns):
                raise ConfigError("sweep.n_values must be integers >= 1")
            updates["sweep_n"] = tuple(int(v) for v in ns)

    if "metrology" in top:
        entries = _mapping(top["metrology"][1], "metrology.")
        _check_keys(entries, ("m", "n_values"), "metrology.")
        m = _scalar(entries, "m", int, "metrology.")
        if m is not None:
            updates["metrology_m"] = m
        ns = _number_list(entries, "n_values", "metrology.")
        if ns is not None:
            if any(int(v) != v or v < 1 for v in ns):
                raise ConfigError("metrology.n_values must be integers >= 1")
            updates["metrology_n"] = tuple(int(v) for v in ns)

    cfg = dataclasses.replace(cfg, **updates)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    preset = cfg.preset
    if preset == "SPATIAL_1USE":
        if cfg.target_table is None or len(cfg.target_table) != 4:
            raise ConfigError("SPATIAL_1USE needs target.table with 4 entries")
    elif preset in ("SPATIAL_2USE_CORRELATED", "TEMPORAL_2USE",
                    "SPATIAL_MU_SWEEP", "TEMPORAL_MU_ONLY_N_SWEEP"):
        if cfg.target_prior is None:
            raise ConfigError(f"{preset} needs target.prior")
        if preset.endswith("SWEEP"):
            key = "sweep_mu" if preset == "SPATIAL_MU_SWEEP" else "sweep_n"
            if getattr(cfg, key) is None:
                raise ConfigError(f"{preset} needs sweep.{key.split('_')[1]}_values")
        elif cfg.target_mu is None:
            raise ConfigError(f"{preset} needs target.mu")
        if preset == "TEMPORAL_MU_ONLY_N_SWEEP":
            if cfg.target_mu is None:
                raise ConfigError(f"{preset} needs target.mu")
            if cfg.generator != "MU_ONLY":
                raise ConfigError(f"{preset} requires the MU_ONLY generator")
    elif preset == "METROLOGY_TABLE":
        if cfg.metrology_m is None or cfg.metrology_n is None:
            raise ConfigError("METROLOGY_TABLE needs metrology.m and metrology.n_values")
        if cfg.target_phase_dist is None:
            raise ConfigError("METROLOGY_TABLE needs target.phase_dist")
        if len(cfg.target_phase_dist) != 2**cfg.metrology_m:
            raise ConfigError(
                f"target.phase_dist needs {2 ** cfg.metrology_m} entries for "
                f"m={cfg.metrology_m}"
            )
    else:  # GRAM_ANALYSIS
        if cfg.metrology_m is None or cfg.metrology_n is None:
            raise ConfigError("GRAM_ANALYSIS needs metrology.m and metrology.n_values")


def serialize(cfg: ExperimentConfig) -> str:
    """Emit a YAML document that parse_config maps back to an equal config."""
    doc: dict = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "output_dir": cfg.output_dir,
    }
    if cfg.generator is not None:
        doc["generator"] = cfg.generator
    target = {}
    if cfg.target_table is not None:
        target["table"] = list(cfg.target_table)
    if cfg.target_prior is not None:
        target["prior"] = list(cfg.target_prior)
    if cfg.target_mu is not None:
        target["mu"] = cfg.target_mu
    if cfg.target_phase_dist is not None:
        target["phase_dist"] = list(cfg.target_phase_dist)
    if target:
        doc["target"] = target
    if cfg.game:
        doc["game"] = dict(cfg.game)
    sweep = {}
    if cfg.sweep_mu is not None:
        sweep["mu_values"] = list(cfg.sweep_mu)
    if cfg.sweep_n is not None:
        sweep["n_values"] = list(cfg.sweep_n)
    if sweep:
        doc["sweep"] = sweep
    metro = {}
    if cfg.metrology_m is not None:
        metro["m"] = cfg.metrology_m
    if cfg.metrology_n is not None:
        metro["n_values"] = list(cfg.metrology_n)
    if metro:
        doc["metrology"] = metro
    return yaml.safe_dump(doc, sort_keys=False)


def seeded_rng(seed: int) -> np.random.Generator:
    """Counter-based deterministic stream for a given seed."""
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# experiment execution


def _game_config(cfg: ExperimentConfig, n_uses: int, kind: str, seed: int) -> GameConfig:
    try:
        return GameConfig(n_uses=n_uses, correlation_kind=kind, seed=seed, **cfg.game)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_metrics(path: Path, log: _game.TrainingLog):
    lines = [
        json.dumps(
            {
                "turn": r.turn,
                "score": r.score,
                "gen_objective": r.gen_objective,
                "kl": r.kl,
                "avg_fidelity": r.avg_fidelity,
            }
        )
        for r in log.records
    ]
    path.write_text("\n".join(lines) + "\n")


def _write_distributions(path: Path, target, learnt, kl: float, choi_fid: float):
    path.write_text(
        json.dumps(
            {
                "target": [float(v) for v in target],
                "learnt": [float(v) for v in learnt],
                "kl": float(kl),
                "choi_fidelity": float(choi_fid),
            },
            indent=2,
        )
        + "\n"
    )


def _write_summary(outdir: Path, cfg: ExperimentConfig, rows: list):
    summary = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "rows": rows,
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def _pauli_target(cfg: ExperimentConfig, n: int, mu: float | None = None) -> ProbTable:
    if cfg.target_table is not None and n == 1:
        return ProbTable(1, np.array(cfg.target_table))
    prior = ProbTable(1, np.array(cfg.target_prior))
    mu = cfg.target_mu if mu is None else mu
    return correlated_table(CorrelationModel(prior, mu), n)


def _run_pauli_rep(cfg, outdir, tag, target, n, kind, rep):
    """One training repetition; writes its metrics/distributions files."""
    gc = _game_config(cfg, n, kind, cfg.seed + rep)
    prior = (
        ProbTable(1, np.array(cfg.target_prior)) if cfg.target_prior is not None else None
    )
    metrics_path = outdir / f"metrics_{tag}rep{rep}.jsonl"
    try:
        gen, log = _game.train(target, cfg.generator, gc, known_prior=prior)
    except TrainingDiverged as exc:
        _write_metrics(metrics_path, exc.log)
        raise
    _write_metrics(metrics_path, log)
    learnt = _game.generator_table(gen, n)
    _write_distributions(
        outdir / f"distributions_{tag}rep{rep}.json",
        target.probs,
        learnt.probs,
        kl_divergence(target, learnt),
        pauli_choi_fidelity(target, learnt),
    )
    return gen, log, learnt


def _run_simple(cfg: ExperimentConfig, outdir: Path) -> list:
    n = 1 if cfg.preset == "SPATIAL_1USE" else 2
    kind = _game.TEMPORAL if cfg.preset == "TEMPORAL_2USE" else _game.SPATIAL
    target = _pauli_target(cfg, n)
    rows = []
    for rep in range(cfg.repetitions):
        gen, log, learnt = _run_pauli_rep(cfg, outdir, "", target, n, kind, rep)
        last = log.records[-1]
        rows.append(
            {
                "rep": rep,
                "seed": cfg.seed + rep,
                "turns": last.turn,
                "stop_reason": log.stop_reason,
                "final_kl": last.kl,
                "final_score": last.score,
                "choi_fidelity": pauli_choi_fidelity(target, learnt),
            }
        )
    return rows


def _run_mu_sweep(cfg: ExperimentConfig, outdir: Path) -> list:
    rows = []
    for mu in cfg.sweep_mu:
        target = _pauli_target(cfg, 2, mu=mu)
        kls = []
        for rep in range(cfg.repetitions):
            _, log, _ = _run_pauli_rep(
                cfg, outdir, f"mu{mu:g}_", target, 2, _game.SPATIAL, rep
            )
            kls.append(log.records[-1].kl)
        rows.append(
            {"mu": mu, "final_kls": kls, "median_final_kl": float(np.median(kls))}
        )
    return rows


def _run_n_sweep(cfg: ExperimentConfig, outdir: Path) -> list:
    rows = []
    for n in cfg.sweep_n:
        target = _pauli_target(cfg, n)
        turns, mus = [], []
        for rep in range(cfg.repetitions):
            gen, log, _ = _run_pauli_rep(
                cfg, outdir, f"n{n}_", target, n, _game.TEMPORAL, rep
            )
            turns.append(log.records[-1].turn)
            mus.append(1.0 / (1.0 + float(np.exp(-gen.mu_logit))))
        rows.append(
            {
                "n": n,
                "target_mu": cfg.target_mu,
                "turns_to_threshold": turns,
                "median_turns": float(np.median(turns)),
                "recovered_mu": mus,
            }
        )
    return rows


def _run_metrology(cfg: ExperimentConfig, outdir: Path) -> list:
    m = cfg.metrology_m
    dist = np.array(cfg.target_phase_dist)
    rows = []
    for n in cfg.metrology_n:
        mc = _metrology.MetrologyConfig(m, n, dist)
        kls, fids = [], []
        for rep in range(cfg.repetitions):
            gc = _game_config(cfg, n, _game.SPATIAL, cfg.seed + rep)
            metrics_path = outdir / f"metrics_n{n}_rep{rep}.jsonl"
            try:
                learnt, log = _metrology.run_metrology_game(mc, gc)
            except TrainingDiverged as exc:
                _write_metrics(metrics_path, exc.log)
                raise
            _write_metrics(metrics_path, log)
            last = log.records[-1]
            _write_distributions(
                outdir / f"distributions_n{n}_rep{rep}.json",
                dist, learnt, last.kl, last.avg_fidelity,
            )
            kls.append(last.kl)
            fids.append(last.avg_fidelity)
        rows.append(
            {
                "m": m,
                "n": n,
                "identifiable": _metrology.is_identifiable(m, n),
                "final_kls": kls,
                "mean_final_kl": float(np.mean(kls)),
                "stderr_final_kl": float(np.std(kls) / np.sqrt(len(kls))),
                "mean_choi_fidelity": float(np.mean(fids)),
            }
        )
    return rows


def _run_gram(cfg: ExperimentConfig, outdir: Path) -> list:
    rows = []
    for n in cfg.metrology_n:
        vals = _metrology.gram_eigenvalues(cfg.metrology_m, n)
        identifiable = _metrology.is_identifiable(cfg.metrology_m, n)
        rows.append(
            {
                "m": cfg.metrology_m,
                "n": n,
                "eigenvalues": [float(v) for v in vals],
                "min_eigenvalue": float(vals.min()),
                "identifiable": identifiable,
                "verdict": "identifiable" if identifiable else "not identifiable",
            }
        )
    return rows


_RUNNERS = {
    "SPATIAL_1USE": _run_simple,
    "SPATIAL_2USE_CORRELATED": _run_simple,
    "TEMPORAL_2USE": _run_simple,
    "SPATIAL_MU_SWEEP": _run_mu_sweep,
    "TEMPORAL_MU_ONLY_N_SWEEP": _run_n_sweep,
    "METROLOGY_TABLE": _run_metrology,
    "GRAM_ANALYSIS": _run_gram,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute a preset; returns the process exit code."""
    try:
        outdir = Path(cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        rows = _RUNNERS[cfg.preset](cfg, outdir)
        _write_summary(outdir, cfg, rows)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="noisegan",
        description="Adversarial reconstruction of correlated noise channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for preset in PRESETS:
        p = sub.add_parser(
            preset.lower().replace("_", "-"), help=f"run the {preset} experiment"
        )
        p.add_argument("--config", help="YAML config path")
        p.add_argument("--output", help="output directory override")
        p.add_argument("--seed", type=int, help="base seed override")
        p.add_argument("--max-turns", type=int, help="max_turns override")
    args = parser.parse_args(argv)
    preset = args.command.replace("-", "_").upper()
    try:
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                print(f"I/O error: {exc}", file=sys.stderr)
                return 3
            cfg = parse_config(text)
            if cfg.preset != preset:
                raise ConfigError(
                    f"config is for {cfg.preset}, but the {args.command} "
                    "subcommand was invoked"
                )
        else:
            cfg = _preset_defaults(preset)
        updates: dict = {}
        if args.output:
            updates["output_dir"] = args.output
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.max_turns is not None:
            updates["game"] = {**cfg.game, "max_turns": args.max_turns}
        if updates:
            cfg = dataclasses.replace(cfg, **updates)
        _validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
