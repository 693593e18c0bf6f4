"""
One seeded run of the protocol: data, local pre-training, a single round of
representation sharing, then every configured variant on the same bundle.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from src.federation.baselines import (
    best_model_selection,
    client_predictions,
    concat_baseline,
    majority_vote,
    training_majority_class,
)
from src.federation.bundle import RepresentationBundle, TransferLedger, collect_bundle, stratified_split
from src.federation.diagnostics import entropy_diagnostic
from src.federation.knn import given_provider, knn_provider
from src.federation.metrics import MetricsReport, score_predictions
from src.federation.trainer import EarlyStopping, FitResult, GlobalProblem, fit
from src.federation.vfl import VflProblem
from src.globalmodel.model import GlobalModel
from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.rng import DrawCounter
from src.localmodels.client import LocalClient, LocalTrainingConfig, pretrain_local
from src.localmodels.permutation import permute_client
from src.numcore.errors import ContractError
from src.synthdata.fileformat import import_dataset
from src.synthdata.generator import SyntheticDataset, generate
from src.utils.console import log


@dataclass
class FederationRun:
    """State shared by all variants of one seed."""

    cfg: object
    seed: int
    dataset: SyntheticDataset
    clients: List[LocalClient]
    bundle: RepresentationBundle
    ledger: TransferLedger
    histories: list = field(default_factory=list)
    checksums: List[str] = field(default_factory=list)

    @property
    def test_index(self):
        return self.bundle.indices("test")

    def verify_frozen(self):
        for client, expected in zip(self.clients, self.checksums):
            if client.checksum() != expected:
                raise ContractError(f"client {client.id} parameters changed after being frozen")


@dataclass
class VariantOutcome:
    report: MetricsReport
    model: Optional[GlobalModel] = None
    fit: Optional[FitResult] = None


@dataclass
class PipelineResult:
    run: FederationRun
    reports: List[MetricsReport]
    models: Dict[str, GlobalModel]
    entropies: np.ndarray


def load_dataset(data_cfg, seed):
    """Dataset from file, or generated from the synthetic spec keyed by the run seed."""
    if data_cfg.path:
        log(f"loading dataset {data_cfg.path}", "DEBUG")
        return import_dataset(data_cfg.path)
    return generate(replace(data_cfg.synthetic, seed=seed))


def pretrain_clients(ds, train_index, hidden, local_cfg, seed, threads=1, class_count=None):
    """Pre-train every client on its own shard in a thread pool.

    Results come back in client order whatever the scheduling.

    Returns:
        Tuple[List[LocalClient], List[TrainingHistory]]
    """
    class_count = class_count or ds.spec.classes
    shards = ds.shards()
    kinds = ds.kinds()
    log(f"pre-training {ds.client_count} clients on {threads} worker(s)", "INFO")

    def job(i):
        client = LocalClient.create(i, kinds[i], shards[i], hidden, class_count, seed)
        return pretrain_local(client, ds.labels, local_cfg, train_index=train_index)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job, i) for i in range(ds.client_count)]
        results = [f.result() for f in futures]
    return [c for c, _ in results], [h for _, h in results]


def prepare_run(cfg, seed, dataset=None):
    """Data, split, pre-trained (and permuted) clients and the one-round bundle."""
    ds = dataset if dataset is not None else load_dataset(cfg.data, seed)
    split = stratified_split(ds.labels, seed, tuple(cfg.training.split))
    train_index = np.flatnonzero(split == 0)
    local_cfg = LocalTrainingConfig(epochs=cfg.training.local_epochs, lr=cfg.training.local_lr)
    clients, histories = pretrain_clients(ds, train_index, cfg.model.latent_dim, local_cfg, seed,
                                          threads=cfg.threads)
    if ds.spec.permutations != "off":
        clients = [permute_client(c, p) for c, p in zip(clients, ds.permutations)]
    ledger = TransferLedger(ds.client_count)
    bundle = collect_bundle(clients, ds.labels, split, ledger)
    checksums = [c.checksum() for c in clients]
    log(f"seed {seed}: bundle of {bundle.client_count} clients x {bundle.sample_count} samples "
        f"({len(bundle.indices('train'))}/{len(bundle.indices('val'))}/{len(bundle.indices('test'))} split)",
        "INFO")
    return FederationRun(cfg, seed, ds, clients, bundle, ledger, histories, checksums)


def graph_provider(run, vc):
    if vc.graph_mode == "given":
        return given_provider(run.dataset.graph)
    if vc.graph_mode == "knn":
        return knn_provider(vc.kappa, run.seed)
    return None


def make_global_model(run, vc):
    m, s = run.cfg.model, run.cfg.sampler
    posterior_kwargs = {"tau": s.tau, "ref": ReferenceDistribution(s.reference, s.sigma),
                        "symmetric": m.symmetric, "self_loop": m.self_loop}
    return GlobalModel.init(vc.model_variant, run.bundle.client_count, run.bundle.latent_dim,
                            run.bundle.class_count, run.seed, hidden=m.gcn_hidden, d_out=m.aligned_dim,
                            alignment_mode=vc.alignment_mode(m.alignment), sinkhorn_steps=m.sinkhorn_steps,
                            use_bias=m.mean_pool_bias, skip=m.skip, graph_mode=vc.graph_mode,
                            posterior_kwargs=posterior_kwargs, graph_provider=graph_provider(run, vc))


def _stopping(cfg):
    t = cfg.training
    return EarlyStopping(max_epochs=t.max_epochs, patience=t.patience, lr_grid=tuple(t.lr_grid))


def _score(run, vc, probs=None, y_pred=None, **fields):
    y_true = run.bundle.labels[run.test_index]
    return score_predictions(vc.variant, vc.graph_mode, run.seed, y_true, probs=probs, y_pred=y_pred,
                             class_count=run.bundle.class_count, **fields)


def _ledger_fields(ledger):
    counts = ledger.to_dict()
    return {"transfers_out": max(counts["outbound"]), "transfers_in": max(counts["inbound"])}, counts


def run_global_variant(run, vc):
    """E, H, J, K: train the server model on the shared latents only."""
    counter = DrawCounter()
    s = run.cfg.sampler

    def make():
        return GlobalProblem(make_global_model(run, vc), run.bundle, seed=run.seed,
                             samples=s.samples_per_step, counter=counter)

    result = fit(make, _stopping(run.cfg), name=vc.label)
    probs = result.problem.predict(run.test_index, s.sample_at_inference, s.inference_samples)
    run.verify_frozen()
    if not run.ledger.is_one_round():
        raise ContractError(f"{vc.label}: one-round protocol violated: {run.ledger.to_dict()}")
    ledger_fields, counts = _ledger_fields(run.ledger)
    extra = {"fit": result.to_dict(), "ledger": counts, "graph_draws": counter.count}
    report = _score(run, vc, probs, epochs_run=result.epochs_run, extra=extra, **ledger_fields)
    return VariantOutcome(report, result.problem.gm, result)


def vfl_variants(run, vc):
    """L and M: end-to-end training that sends gradients back to the clients."""
    if not vc.is_vfl:
        raise ContractError(f"{vc.label} is not an end-to-end variant")
    counter = DrawCounter()
    ledger = TransferLedger(run.bundle.client_count)
    s, t = run.cfg.sampler, run.cfg.training
    if vc.variant == "L_vfl_graph_align":
        local_lr = t.vfl_local_lr

        def fresh_clients():
            return [c.copy() for c in run.clients]
    else:
        local_lr = None
        shards, kinds = run.dataset.shards(), run.dataset.kinds()

        def fresh_clients():
            return [LocalClient.create(i, kinds[i], shards[i], run.cfg.model.latent_dim,
                                       run.bundle.class_count, run.seed) for i in range(run.bundle.client_count)]

    def make():
        return VflProblem(make_global_model(run, vc), fresh_clients(), run.bundle, ledger, local_lr=local_lr,
                          seed=run.seed, samples=s.samples_per_step, counter=counter)

    result = fit(make, _stopping(run.cfg), name=vc.label)
    probs = result.problem.predict(run.test_index, s.sample_at_inference, s.inference_samples)
    run.verify_frozen()
    ledger_fields, counts = _ledger_fields(ledger)
    extra = {"fit": result.to_dict(), "ledger": counts, "graph_draws": counter.count,
             "local_lr": local_lr if local_lr is not None else result.lr}
    report = _score(run, vc, probs, epochs_run=result.epochs_run, extra=extra, **ledger_fields)
    return VariantOutcome(report, result.problem.gm, result)


def run_baseline(run, vc):
    """B, D, G: systems built from the shared payload without the fusion model."""
    bundle, test = run.bundle, run.test_index
    ledger_fields, counts = _ledger_fields(run.ledger)
    if vc.variant == "B_majority":
        preds = majority_vote(bundle.local_predictions()[:, test], bundle.class_count)
        return VariantOutcome(_score(run, vc, y_pred=preds, extra={"ledger": counts}, **ledger_fields))
    if vc.variant == "D_best_model":
        chosen, scores = best_model_selection(bundle)
        fallback = training_majority_class(bundle)
        preds = client_predictions(bundle, chosen, fallback)[test]
        probs = bundle.local_probs[chosen][test].copy()
        absent = ~bundle.present[chosen][test]
        probs[absent] = np.eye(bundle.class_count)[fallback]
        extra = {"chosen_client": chosen, "val_f1": scores, "ledger": counts}
        return VariantOutcome(_score(run, vc, probs, y_pred=preds, extra=extra, **ledger_fields))
    result = concat_baseline(bundle, _stopping(run.cfg), run.seed)
    probs = result.problem.predict(test)
    extra = {"fit": result.to_dict(), "ledger": counts}
    return VariantOutcome(_score(run, vc, probs, epochs_run=result.epochs_run, extra=extra, **ledger_fields),
                          fit=result)


def run_variant(run, vc):
    start = time.perf_counter()
    if vc.is_baseline:
        outcome = run_baseline(run, vc)
    elif vc.is_vfl:
        outcome = vfl_variants(run, vc)
    else:
        outcome = run_global_variant(run, vc)
    outcome.report.wall_clock_s = time.perf_counter() - start
    auc = outcome.report.auc
    auc_text = "n/a" if auc is None or np.isnan(auc) else f"{auc:.3f}"
    log(f"seed {run.seed} {vc.label}: F1 {outcome.report.f1:.3f}, AUC {auc_text}, "
        f"{outcome.report.epochs_run} epochs, {outcome.report.wall_clock_s:.1f}s", "SUCCESS")
    return outcome


def run_pipeline(cfg, seed=None, dataset=None):
    """Run every configured variant for one seed.

    Args:
        cfg: validated ExperimentConfig
        seed: run seed (the first configured seed when None)
        dataset: pre-built dataset replacing ``cfg.data``

    Returns:
        PipelineResult with one MetricsReport per variant, the trained global
        models by variant label and the per-sample local-prediction entropies
    """
    seed = cfg.seeds[0] if seed is None else seed
    variants = cfg.variant_configs()
    run = prepare_run(cfg, seed, dataset)
    entropies = entropy_diagnostic(run.bundle.local_predictions(), run.bundle.class_count)
    log(f"seed {seed}: median local-prediction entropy {np.median(entropies):.3f}", "INFO")
    reports, models = [], {}
    for vc in variants:
        outcome = run_variant(run, vc)
        reports.append(outcome.report)
        if outcome.model is not None:
            models[vc.label] = outcome.model
    return PipelineResult(run, reports, models, entropies)
