"""A simulated federated client: local training, subspace extraction, evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .data import ClientShard, make_rng
from .errors import DimensionMismatch, InvalidInput
from .model import ParamVector
from .numerics import Subspace, representative_subspace

DEFAULT_SUBSAMPLE_M = 256


@dataclass
class ClientState:
    id: int
    shard: ClientShard
    params: ParamVector
    seed: int
    local_iters: int = 100
    batch_size: int = 64
    lr: float = 0.05

    def __post_init__(self):
        n = len(self.shard.train)
        if n == 0:
            raise InvalidInput(f"client {self.id} has an empty training split")
        if self.local_iters < 0:
            raise InvalidInput("local_iters must be >= 0")
        if self.lr <= 0:
            raise InvalidInput("lr must be > 0")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be >= 1")
        self.batch_size = min(self.batch_size, n)

    @property
    def num_train(self) -> int:
        return len(self.shard.train)


@dataclass(frozen=True)
class ClientReport:
    id: int
    params: ParamVector
    subspace: Subspace | None
    num_train: int


def round_rng(seed: int, client_id: int, round_index: int, stream: int) -> np.random.Generator:
    """Generator for one (client, round) pair; ``stream`` separates batches from feature sampling."""
    return make_rng(seed, client_id, round_index, stream)


def train(state: ClientState, anchor: ParamVector | None, lam: float, rng, iters: int | None = None) -> None:
    """Run minibatch SGD in place on ``state.params``."""
    x, y = state.shard.train.features, state.shard.train.labels
    n = x.shape[0]
    params = state.params
    for _ in range(state.local_iters if iters is None else iters):
        idx = rng.choice(n, size=state.batch_size, replace=False)
        _, grad = model.loss_and_grad(params, x[idx], y[idx], anchor, lam)
        params = model.sgd_step(params, grad, state.lr)
    state.params = params


def extract_subspace(state: ClientState, k: int, subsample_m: int, rng) -> Subspace:
    """Top-``k`` feature-space directions of the representation on a sample of training rows."""
    x = state.shard.train.features
    m = min(subsample_m, x.shape[0])
    if m < k:
        raise InvalidInput(f"client {state.id}: {m} samples cannot span a {k}-dim subspace")
    idx = np.sort(rng.choice(x.shape[0], size=m, replace=False))
    _, feats = model.forward(state.params, x[idx])
    return representative_subspace(feats, k)


def local_round(
    state: ClientState,
    aggregated: ParamVector,
    lam: float,
    k: int,
    subsample_m: int = DEFAULT_SUBSAMPLE_M,
    round_index: int = 0,
) -> ClientReport:
    """Receive ``aggregated``, train against it as anchor, and report params plus subspace."""
    if aggregated.spec != state.params.spec:
        raise DimensionMismatch(f"client {state.id}: aggregated model has a different spec")
    if k > min(subsample_m, aggregated.spec.representation_dim):
        raise InvalidInput(f"k={k} exceeds min(subsample_m, representation width)")
    state.params = aggregated
    train(state, aggregated, lam, round_rng(state.seed, state.id, round_index, 0))
    subspace = extract_subspace(state, k, subsample_m, round_rng(state.seed, state.id, round_index, 1))
    return ClientReport(state.id, state.params, subspace, state.num_train)


def accuracy(params: ParamVector, ds) -> float:
    if len(ds) == 0:
        raise InvalidInput("cannot evaluate on an empty test set")
    return float(np.mean(model.predict(params, ds.features) == ds.labels))


def evaluate(state: ClientState, params: ParamVector | None = None) -> float:
    """Accuracy of ``params`` (default: the client's current model) on its own test split."""
    return accuracy(state.params if params is None else params, state.shard.test)
