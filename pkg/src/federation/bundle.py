"""
The one-round payload and its transfer ledger.

Each client ships, exactly once, its latent rows h_ik for all m samples and
the class probabilities of its frozen head. Absent (client, sample) pairs
travel as zero rows and are flagged by the ``present`` mask.
"""

import threading
from dataclasses import dataclass
from typing import List

import numpy as np
from sklearn.model_selection import train_test_split

from src.numcore.errors import ContractError, ShapeError
from src.utils.console import log

SPLIT_NAMES = ("train", "val", "test")
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


class TransferLedger:
    """Per-client counts of representation uploads and gradient downloads."""

    def __init__(self, client_count):
        self.client_count = client_count
        self.outbound = [0] * client_count
        self.inbound = [0] * client_count
        self._lock = threading.Lock()

    def _check(self, client_id):
        if not 0 <= client_id < self.client_count:
            raise ContractError(f"client {client_id} is not part of this federation")

    def send_representations(self, client_id, count=1):
        self._check(client_id)
        with self._lock:
            self.outbound[client_id] += count

    def send_gradients(self, client_id, count=1):
        self._check(client_id)
        with self._lock:
            self.inbound[client_id] += count

    def is_one_round(self):
        return all(o == 1 for o in self.outbound) and all(i == 0 for i in self.inbound)

    def to_dict(self):
        with self._lock:
            return {"outbound": list(self.outbound), "inbound": list(self.inbound)}


@dataclass
class RepresentationBundle:
    """
    Everything the server ever sees from the clients.

    Args:
        latents: n arrays (m x d), zero rows where the client holds no data
        local_probs: n arrays (m x classes) from each client's head, zero rows where absent
        labels: class index per sample, length m
        present: (n x m) boolean mask
        split: per-sample split code, 0 train, 1 val, 2 test
    """

    latents: List[np.ndarray]
    local_probs: List[np.ndarray]
    labels: np.ndarray
    present: np.ndarray
    split: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.present = np.asarray(self.present, dtype=bool)
        self.split = np.asarray(self.split, dtype=np.int64)
        m = len(self.labels)
        if not self.latents:
            raise ContractError("a bundle needs at least one client")
        if self.present.shape != (len(self.latents), m):
            raise ShapeError(f"present mask {self.present.shape} does not match "
                             f"{len(self.latents)} clients x {m} samples")
        if self.split.shape != (m,):
            raise ShapeError(f"split has {self.split.shape} entries for {m} samples")
        for i, (L, P) in enumerate(zip(self.latents, self.local_probs)):
            if L.shape[0] != m or P.shape[0] != m:
                raise ShapeError(f"client {i}: latents {L.shape} / probabilities {P.shape} "
                                 f"do not cover {m} samples")

    @property
    def client_count(self):
        return len(self.latents)

    @property
    def sample_count(self):
        return len(self.labels)

    @property
    def latent_dim(self):
        return self.latents[0].shape[1]

    @property
    def class_count(self):
        return self.local_probs[0].shape[1]

    def indices(self, name):
        """Sample indices of the ``train``, ``val`` or ``test`` split."""
        return np.flatnonzero(self.split == SPLIT_NAMES.index(name))

    def local_predictions(self):
        """(n x m) argmax class per client, -1 where the client is absent."""
        preds = np.stack([np.argmax(P, axis=1) for P in self.local_probs])
        return np.where(self.present, preds, -1)

    def with_latents(self, latents):
        """Same labels, mask and split over a new set of latents."""
        return RepresentationBundle(list(latents), self.local_probs, self.labels, self.present, self.split)


def stratified_split(labels, seed, fractions=SPLIT_FRACTIONS):
    """Per-sample split codes with class-stratified train/val/test fractions."""
    labels = np.asarray(labels)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) <= 0:
        raise ContractError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    idx = np.arange(len(labels))
    train_frac, val_frac, test_frac = fractions
    rest, test = train_test_split(idx, test_size=test_frac, random_state=seed, stratify=labels)
    train, val = train_test_split(rest, test_size=val_frac / (train_frac + val_frac),
                                  random_state=seed, stratify=labels[rest])
    split = np.zeros(len(labels), dtype=np.int64)
    split[val] = 1
    split[test] = 2
    return split


def client_payload(client):
    """What one client uploads: masked latents and masked head probabilities."""
    mask = client.present[:, None]
    latents = client.embed_masked().numpy()
    probs = np.where(mask, client.head.forward(latents).numpy(), 0.0)
    return latents, probs


def collect_bundle(clients, labels, split, ledger=None):
    """One round of client-to-server transfer.

    Args:
        clients: trained LocalClient objects, ordered by id
        labels: class index per sample
        split: split code per sample (see ``stratified_split``)
        ledger: TransferLedger; each client is charged one outbound transfer

    Returns:
        RepresentationBundle
    """
    if not clients:
        raise ContractError("cannot collect a bundle from zero clients")
    latents, probs = [], []
    for client in clients:
        L, P = client_payload(client)
        latents.append(L)
        probs.append(P)
        if ledger is not None:
            ledger.send_representations(client.id)
    present = np.stack([c.present for c in clients])
    log(f"collected representations from {len(clients)} clients "
        f"({len(labels)} samples, d={latents[0].shape[1]})", "DEBUG")
    return RepresentationBundle(latents, probs, labels, present, split)
