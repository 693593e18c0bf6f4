"""
Multi-round end-to-end variants.

Unlike every other variant these send gradients back to the clients: each
training step costs one latent upload and one gradient download per client.

    L_vfl_graph_align  pre-trained clients, unfrozen, trained with a local lr
    M_vfl_scratch      randomly initialized clients trained jointly with the server
"""

import numpy as np

from src.federation.trainer import validation_cross_entropy
from src.globalmodel.model import f3_loss, predict_proba
from src.numcore.errors import ContractError


class VflProblem:
    """
    Joint training of a GlobalModel and the clients' embeddings, for ``trainer.fit``.

    Args:
        gm: GlobalModel, updated in place
        clients: unfrozen LocalClient copies, updated in place
        bundle: RepresentationBundle supplying labels, mask and split
        ledger: TransferLedger charged per step
        local_lr: learning rate of the client embeddings (the global lr when None)
        seed: key of the graph-sampling stream
        samples: graph samples per step
        counter: DrawCounter for graph draws
    """

    def __init__(self, gm, clients, bundle, ledger, local_lr=None, seed=0, samples=1, counter=None):
        if len(clients) != gm.client_count:
            raise ContractError(f"{len(clients)} clients for a model over {gm.client_count}")
        for c in clients:
            c.frozen = False
        self.gm = gm
        self.clients = clients
        self.ledger = ledger
        self.local_lr = local_lr
        self.seed = seed
        self.samples = samples
        self.counter = counter
        self.bundle = bundle
        self.train_index = bundle.indices("train")
        self.val_index = bundle.indices("val")
        self._refresh()

    def _refresh(self):
        self.bundle = self.bundle.with_latents([c.embed_masked().numpy() for c in self.clients])

    def param_groups(self, lr):
        local = [p for c in self.clients for p in c.embedding.parameter_arrays()]
        return [(self.gm.parameter_arrays(), lr), (local, lr if self.local_lr is None else self.local_lr)]

    def train_loss(self, leaves, step):
        k = len(self.gm.parameter_arrays())
        global_leaves, rest = leaves[:k], leaves[k:]
        latents = []
        for c in self.clients:
            size = len(c.embedding.names)
            latents.append(c.embed_masked(rest[:size]))
            rest = rest[size:]
            self.ledger.send_representations(c.id)
            self.ledger.send_gradients(c.id)
        return f3_loss(self.gm, self.bundle, self.train_index, global_leaves, seed=self.seed, step=step,
                       samples=self.samples, counter=self.counter, latents=latents)

    def after_step(self, step):
        self.gm.after_step()
        self._refresh()

    def val_loss(self):
        probs = predict_proba(self.gm, self.bundle, self.val_index)
        return validation_cross_entropy(probs, self.bundle.labels[self.val_index])

    def after_restore(self):
        self._refresh()
        for c in self.clients:
            self.ledger.send_representations(c.id)

    def predict(self, index, sample_at_inference=False, samples=1):
        return predict_proba(self.gm, self.bundle, np.asarray(index), seed=self.seed,
                             sample_at_inference=sample_at_inference, samples=samples)
