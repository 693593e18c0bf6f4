"""
Subcommand handlers for the launcher.

Every handler takes the parsed argparse namespace and returns
``(success, message)``. Configuration problems raise ConfigError (exit code 2
in the launcher); a False result means a property or run failed (exit code 1).
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Tuple

import numpy as np
import pandas as pd

from src.cli.bench import bench_samplers, draw_ratio
from src.cli.config import ExperimentConfig, load_config, save_config
from src.cli.suites import SUITES, write_suite
from src.federation.diagnostics import entropy_histogram
from src.federation.metrics import write_reports
from src.federation.pipeline import run_pipeline
from src.globalmodel.checkpoint import export_heatmaps, load_global_model, save_global_model
from src.localmodels.checkpoint import save_client
from src.numcore.errors import ConfigError, ContractError
from src.synthdata.fileformat import export_dataset
from src.synthdata.generator import generate
from src.synthdata.selftest import graph_informativeness
from src.utils.console import log

DATASET_FILE = "dataset.f3ds"


def resolve_config(args):
    """Config from ``--config`` (defaults when absent) with CLI overrides applied, validated."""
    path = getattr(args, "config", None)
    cfg = load_config(path) if path else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "threads", None):
        cfg.threads = args.threads
    return cfg.validate()


def write_run_artifacts(result, out_dir):
    """Per-seed metrics, entropy histogram, client and global checkpoints, heatmaps."""
    run = result.run
    seed_dir = os.path.join(out_dir, f"seed_{run.seed}")
    write_reports(result.reports, seed_dir)
    entropy_histogram(result.entropies, run.bundle.class_count).to_csv(
        os.path.join(seed_dir, "entropy_histogram.csv"), index=False)
    pd.DataFrame({"sample": np.arange(len(result.entropies)), "entropy": result.entropies}).to_csv(
        os.path.join(seed_dir, "entropies.csv"), index=False)
    for client in run.clients:
        save_client(client, os.path.join(seed_dir, "clients", f"client_{client.id}.json"))
    for label, gm in result.models.items():
        name = label.replace("@", "_")
        save_global_model(gm, os.path.join(seed_dir, "models", f"{name}.json"))
        export_heatmaps(gm, os.path.join(seed_dir, "heatmaps"), prefix=f"{name}_")
    return seed_dir


def _refuse_graph(latents, present):
    raise ContractError("checkpoint was loaded without its graph provider")


class CommandRunner:
    """
    Dispatches launcher subcommands to their handlers.
    """

    def __init__(self):
        self.handlers = {
            "run": self._run,
            "verify": self._verify,
            "bench": self._bench,
            "gen-data": self._gen_data,
            "export-heatmaps": self._export_heatmaps,
        }

    def execute(self, command, args) -> Tuple[bool, str]:
        """
        Execute one subcommand.

        Args:
            command: subcommand name
            args: parsed argparse namespace

        Returns:
            Tuple of (success: bool, message: str)
        """
        handler = self.handlers.get(command)
        if handler is None:
            raise ConfigError(f"Unknown command '{command}', expected one of {sorted(self.handlers)}")
        return handler(args)

    def _run(self, args):
        cfg = resolve_config(args)
        variants = cfg.variant_configs()
        if args.dry_run:
            return True, (f"config valid: {len(variants)} variant(s) x {len(cfg.seeds)} seed(s) "
                          f"-> {cfg.output_dir}")
        os.makedirs(cfg.output_dir, exist_ok=True)
        save_config(cfg, os.path.join(cfg.output_dir, "config.json"))
        log(f"running {', '.join(v.label for v in variants)} for seeds {cfg.seeds}", "HEADER")

        workers = min(cfg.threads, len(cfg.seeds))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_pipeline, cfg, seed) for seed in cfg.seeds]
            results = [f.result() for f in futures]

        reports = []
        for result in results:
            seed_dir = write_run_artifacts(result, cfg.output_dir)
            log(f"seed {result.run.seed}: artifacts in {seed_dir}", "INFO")
            reports.extend(result.reports)
        json_path, csv_path = write_reports(reports, cfg.output_dir)
        return True, f"metrics for {len(reports)} run(s) written to {csv_path} and {json_path}"

    def _verify(self, args):
        names = args.suite or list(SUITES)
        out_dir = os.path.join(args.out or "runs", "verify")
        failures = []
        for name in names:
            log(f"verify suite '{name}'", "HEADER")
            result = SUITES[name]()
            path = write_suite(result, out_dir)
            status = "SUCCESS" if result.passed else "ERROR"
            log(f"{name}: {len(result.checks) - len(result.failures)}/{len(result.checks)} checks passed "
                f"({path})", status)
            failures.extend(f"{name}: {c.name} ({c.detail})" for c in result.failures)
        if failures:
            return False, "failed properties:\n  " + "\n  ".join(failures)
        return True, f"all {len(names)} suite(s) passed; evidence in {out_dir}"

    def _bench(self, args):
        out_dir = args.out or "runs"
        frame = bench_samplers(sizes=tuple(args.sizes), repeats=args.repeats, seed=args.seed or 0)
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "bench.csv")
        frame.to_csv(path, index=False)
        ratio = draw_ratio(frame)
        for row in frame.itertuples():
            log(f"{row.sampler:>6} n={row.size}: {row.seconds_per_million:.4f} s per 10^6 samples, "
                f"{row.draws_per_sample:g} draws per sample", "INFO")
        if ratio != 2.0:
            return False, f"Gumbel/ICDF draw ratio is {ratio}, expected 2.0"
        return True, f"draw ratio Gumbel/ICDF = {ratio:g}; table written to {path}"

    def _gen_data(self, args):
        cfg = resolve_config(args)
        spec = replace(cfg.data.synthetic, seed=cfg.seeds[0])
        ds = generate(spec)
        out_dir = cfg.output_dir
        path = export_dataset(ds, os.path.join(out_dir, DATASET_FILE))
        ds.to_csv(os.path.join(out_dir, "dataset.csv"))
        message = f"dataset with {ds.client_count} clients x {ds.sample_count} samples written to {path}"
        if args.self_test:
            scores = graph_informativeness(ds, seed=spec.seed)
            log(f"graph self-test: F1 {scores['f1_graph']:.3f} with graph, "
                f"{scores['f1_identity']:.3f} without (gain {scores['gain']:+.3f})", "INFO")
            if scores["gain"] < 0.05:
                return False, f"{message}; planted graph is not informative (gain {scores['gain']:+.3f})"
        return True, message

    def _export_heatmaps(self, args):
        if not os.path.exists(args.checkpoint):
            raise ConfigError(f"checkpoint not found: {args.checkpoint}")
        gm = load_global_model(args.checkpoint, graph_provider=_refuse_graph)
        paths = export_heatmaps(gm, args.out or os.path.dirname(os.path.abspath(args.checkpoint)))
        if not paths:
            return False, f"{gm!r} has neither a learned graph nor alignment matrices"
        return True, "wrote " + ", ".join(paths)
