"""Tests for the config loader, the launcher and its subcommands."""

import argparse
import glob
import json
import os

import pandas as pd
import pytest

from run import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from src.cli.bench import BENCH_COLUMNS, bench_samplers, draw_ratio
from src.cli.commands import DATASET_FILE, CommandRunner
from src.cli.config import ExperimentConfig, load_config
from src.cli.suites import SUITES
from src.federation.metrics import REPORT_COLUMNS
from src.numcore.errors import ConfigError
from src.synthdata.fileformat import import_dataset
from tests.conftest import tiny_config

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def write_config(tmp_path, cfg=None, name="config.json", **top):
    data = (cfg or tiny_config()).to_dict()
    data["output_dir"] = str(tmp_path / "out")
    data.update(top)
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# -- config -----------------------------------------------------------------

def test_config_round_trips_through_json(tmp_path):
    path = write_config(tmp_path)
    cfg = load_config(path).validate()
    assert cfg.to_dict() == json.loads(open(path, encoding="utf-8").read())
    assert [vc.label for vc in cfg.variant_configs()] == ["E_mean_pool", "H_no_align@icdf", "K_align@icdf"]


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "typo.json"
    path.write_text(json.dumps({"training": {"max_epoch": 3}}), encoding="utf-8")
    with pytest.raises(ConfigError, match="max_epoch"):
        load_config(str(path))


def test_unknown_extension_is_rejected(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text("seeds = [0]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))
    path = tmp_path / "broken.json"
    path.write_text("{\"seeds\": [0", encoding="utf-8")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(str(path))


@pytest.mark.parametrize("mutate", [
    lambda cfg: setattr(cfg, "schema_version", 2),
    lambda cfg: setattr(cfg, "seeds", []),
    lambda cfg: setattr(cfg, "threads", 0),
    lambda cfg: setattr(cfg, "variants", ["K_align@knn"]) or setattr(cfg.model, "kappa", 4),
    lambda cfg: setattr(cfg.model, "alignment", "hard") or setattr(cfg.model, "aligned_dim", 3),
    lambda cfg: setattr(cfg.sampler, "tau", 0.0),
    lambda cfg: setattr(cfg.training, "split", [0.8, 0.2, 0.0]),
    lambda cfg: setattr(cfg.training, "lr_grid", []),
])
def test_invalid_configs(mutate):
    cfg = tiny_config()
    mutate(cfg)
    with pytest.raises(ConfigError):
        cfg.validate()


@pytest.mark.parametrize("name", ["quickstart.yaml", "ablation.yaml"])
def test_shipped_configs_validate(name):
    pytest.importorskip("yaml")
    cfg = load_config(os.path.join(PROJECT_ROOT, "configs", name)).validate()
    assert cfg.variant_configs()


# -- launcher ---------------------------------------------------------------

def test_missing_config_exits_with_usage_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == EXIT_USAGE


def test_dry_run_validates_without_training(tmp_path):
    path = write_config(tmp_path)
    assert main(["run", "--config", path, "--dry-run"]) == EXIT_OK
    assert not os.path.exists(tmp_path / "out")


def test_invalid_config_exits_with_usage_code(tmp_path):
    path = write_config(tmp_path, variants=["F_set_transformer"])
    assert main(["run", "--config", path, "--dry-run"]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [["frobnicate"], ["run"], ["bench", "--sizes", "many"]])
def test_argument_errors(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2


def test_unknown_command_is_a_config_error():
    with pytest.raises(ConfigError):
        CommandRunner().execute("train", argparse.Namespace())


def test_run_writes_every_artifact(tmp_path):
    cfg = tiny_config(max_epochs=3)
    path = write_config(tmp_path, cfg)
    assert main(["run", "--config", path, "--threads", "1"]) == EXIT_OK
    out = tmp_path / "out"
    frame = pd.read_csv(out / "metrics.csv")
    assert tuple(frame.columns) == REPORT_COLUMNS
    assert list(frame["variant"]) == ["E_mean_pool", "H_no_align", "K_align"]
    assert (out / "config.json").exists()
    seed_dir = out / "seed_0"
    for name in ("metrics.json", "entropy_histogram.csv", "entropies.csv"):
        assert (seed_dir / name).exists()
    assert len(glob.glob(str(seed_dir / "clients" / "client_*.json"))) == 4
    checkpoint = seed_dir / "models" / "K_align_icdf.json"
    assert checkpoint.exists()

    heatmaps = tmp_path / "heatmaps"
    assert main(["export-heatmaps", "--checkpoint", str(checkpoint), "--out", str(heatmaps)]) == EXIT_OK
    assert (heatmaps / "theta.csv").exists() and (heatmaps / "alignment.csv").exists()
    assert main(["export-heatmaps", "--checkpoint", str(seed_dir / "models" / "E_mean_pool.json"),
                 "--out", str(heatmaps)]) == EXIT_FAILURE


def test_gen_data_writes_a_readable_dataset(tmp_path):
    path = write_config(tmp_path)
    assert main(["gen-data", "--config", path, "--seed", "5"]) == EXIT_OK
    out = tmp_path / "out"
    ds = import_dataset(str(out / DATASET_FILE))
    assert ds.spec.seed == 5
    assert ds.client_count == 4 and ds.sample_count == 80
    assert (out / "dataset.csv").exists()


# -- bench and verify -------------------------------------------------------

def test_bench_counts_two_draws_per_gumbel_sample():
    frame = bench_samplers(sizes=(1000, 5000), repeats=2, seed=1)
    assert tuple(frame.columns) == BENCH_COLUMNS
    assert len(frame) == 4
    assert draw_ratio(frame) == 2.0
    assert draw_ratio(frame, size=5000) == 2.0
    assert list(frame[frame["sampler"] == "icdf"]["draws_per_sample"]) == [1.0, 1.0]


def test_bench_command_writes_its_table(tmp_path):
    assert main(["bench", "--sizes", "2000", "--repeats", "1", "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "bench.csv")
    assert tuple(frame.columns) == BENCH_COLUMNS


@pytest.mark.parametrize("name", ["sinkhorn", "permutation", "gradcheck"])
def test_fast_suites_pass(name):
    result = SUITES[name]()
    assert result.checks
    assert result.passed, [f"{c.name}: {c.detail}" for c in result.failures]


@pytest.mark.slow
def test_verify_command_writes_evidence(tmp_path):
    assert main(["verify", "--suite", "cdf", "bias", "--out", str(tmp_path)]) == EXIT_OK
    for suite in ("cdf", "bias"):
        record = json.loads((tmp_path / "verify" / f"verify_{suite}.json").read_text(encoding="utf-8"))
        assert record["suite"] == suite
