"""End-to-end simulations: FedSaC, FedAvg and Local baselines, hetero-architecture mode, sweeps.

Every run is a pure function of its ``ExperimentConfig``. Clients inside a
round may be dispatched to a thread pool (``workers > 1``); each client owns
its own seeded generators, so scheduling never changes the results.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import client as cl
from .. import data, model, server
from ..errors import FedSaCError, InvalidInput, with_context
from ..model import MlpSpec, ParamVector
from .config import ExperimentConfig

log = logging.getLogger(__name__)

# Sub-stream tags for derive_seed.
_DATA, _PARTITION, _INIT, _CLIENT, _COHORT = 1, 2, 3, 4, 5


@dataclass
class RoundRecord:
    round: int
    per_client_accuracy: np.ndarray
    participants: np.ndarray
    mean_accuracy: float
    w: np.ndarray | None = None
    s: np.ndarray | None = None
    c: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class History:
    method: str
    records: list[RoundRecord]
    final_models: list[ParamVector]

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def mean_curve(self) -> np.ndarray:
        return np.array([r.mean_accuracy for r in self.records])


# --------------------------------------------------------------------------
# setup


def build_dataset(cfg: ExperimentConfig) -> data.LabeledDataset:
    d = cfg.dataset
    if d.source == "idx":
        return data.load_idx(d.images_path, d.labels_path)
    if d.source == "csv":
        return data.load_csv(d.csv_path)
    return data.generate_synthetic(
        data.derive_seed(cfg.seed, _DATA),
        d.num_classes,
        d.feature_dim,
        d.samples_per_class,
        data.ShiftSpec(d.covariate_level, d.concept_level),
        class_sep=d.class_sep,
        shift_scale=d.shift_scale,
        noise=d.noise,
    )


def build_shards(cfg: ExperimentConfig, ds: data.LabeledDataset) -> list[data.ClientShard]:
    p = cfg.partition
    seed = data.derive_seed(cfg.seed, _PARTITION)
    if p.scheme == "homo":
        return data.partition_homogeneous(ds, cfg.num_clients, seed)
    if p.scheme == "dirichlet":
        return data.partition_dirichlet(ds, cfg.num_clients, p.alpha, seed, min_size=p.min_size)
    return data.partition_pathological(ds, cfg.num_clients, p.classes_per_client, seed)


def model_spec(cfg: ExperimentConfig, ds: data.LabeledDataset, hidden=None) -> MlpSpec:
    return MlpSpec(ds.feature_dim, ds.num_classes, tuple(hidden or cfg.model.hidden_dims))


def initial_params(cfg: ExperimentConfig, spec: MlpSpec, group: int = 0) -> ParamVector:
    return model.init(spec, data.derive_seed(cfg.seed, _INIT, group))


def make_clients(cfg, shards, params) -> list[cl.ClientState]:
    c = cfg.client
    return [
        cl.ClientState(
            id=sh.client_id,
            shard=sh,
            params=params[sh.client_id],
            seed=data.derive_seed(cfg.seed, _CLIENT),
            local_iters=c.local_iters,
            batch_size=c.batch_size,
            lr=c.lr,
        )
        for sh in shards
    ]


def _map_clients(fn, ids, workers: int, round_index: int) -> list:
    def call(i):
        try:
            return fn(i)
        except FedSaCError as e:
            raise with_context(e, f"round {round_index}, client {i}") from e

    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(call, ids))
    return [call(i) for i in ids]


def _cohort(cfg: ExperimentConfig, t: int) -> np.ndarray:
    n = cfg.num_clients
    if cfg.server.subsample is None:
        return np.arange(n)
    return server.subsample_clients(n, cfg.server.subsample, t, data.derive_seed(cfg.seed, _COHORT))


def _record(t, acc, cohort, step=None, trace=False, **extra) -> RoundRecord:
    rec = RoundRecord(
        round=t,
        per_client_accuracy=np.asarray(acc, dtype=np.float64),
        participants=np.asarray(cohort),
        mean_accuracy=float(np.mean(np.asarray(acc)[cohort])),
        extra=extra,
    )
    if trace and step is not None:
        rec.w, rec.s, rec.c = step.w, step.s, step.c
    return rec


def _setup(cfg):
    ds = build_dataset(cfg)
    shards = build_shards(cfg, ds)
    spec = model_spec(cfg, ds)
    theta0 = initial_params(cfg, spec)
    clients = make_clients(cfg, shards, [theta0] * len(shards))
    return clients, theta0


# --------------------------------------------------------------------------
# methods


def run_fedsac(cfg: ExperimentConfig, trace: bool = False) -> History:
    """FedSaC: personalized aggregation through a per-round cooperation matrix.

    Round 0 starts every client from the common initial model (identity
    aggregation). Accuracy is measured on each client's locally trained
    model; unselected clients in subsampled rounds keep their previous
    parameters and are evaluated as they stand.
    """
    clients, theta0 = _setup(cfg)
    n, T = len(clients), cfg.rounds
    aggregated = [theta0] * n
    c, sv = cfg.client, cfg.server
    records = []
    for t in range(T):
        cohort = _cohort(cfg, t)
        reports = _map_clients(
            lambda i: cl.local_round(clients[i], aggregated[i], c.lam, sv.k, c.subsample_m, t),
            list(cohort), cfg.workers, t,
        )
        try:
            step = server.server_step(reports, server.effective_alpha(t, T, sv), sv.beta)
        except FedSaCError as e:
            raise with_context(e, f"round {t}, server") from e
        for i, theta in zip(cohort, step.aggregated):
            aggregated[i] = theta
        acc = [cl.evaluate(s) for s in clients]
        records.append(_record(t, acc, cohort, step, trace))
        log.debug("fedsac round %d mean acc %.4f", t, records[-1].mean_accuracy)
    return History("fedsac", records, aggregated)


def run_fedavg(cfg: ExperimentConfig, trace: bool = False) -> History:
    """FedAvg: one global model, size-weighted average, evaluated after aggregation."""
    clients, theta = _setup(cfg)
    c = cfg.client
    records = []
    for t in range(cfg.rounds):
        cohort = _cohort(cfg, t)

        def work(i):
            st = clients[i]
            st.params = theta
            cl.train(st, None, 0.0, cl.round_rng(st.seed, st.id, t, 0))
            return st.params

        trained = _map_clients(work, list(cohort), cfg.workers, t)
        sizes = np.array([clients[i].num_train for i in cohort], dtype=np.float64)
        p = sizes / sizes.sum()
        theta = server.aggregate(p[None, :], trained)[0]
        acc = [cl.evaluate(s, theta) for s in clients]
        records.append(_record(t, acc, cohort))
    for st in clients:
        st.params = theta
    return History("fedavg", records, [theta] * len(clients))


def run_local(cfg: ExperimentConfig, trace: bool = False) -> History:
    """Independent training with no communication."""
    clients, _ = _setup(cfg)
    everyone = np.arange(len(clients))
    records = []
    for t in range(cfg.rounds):

        def work(i):
            st = clients[i]
            cl.train(st, None, 0.0, cl.round_rng(st.seed, st.id, t, 0))

        _map_clients(work, list(everyone), cfg.workers, t)
        acc = [cl.evaluate(s) for s in clients]
        records.append(_record(t, acc, everyone))
    return History("local", records, [s.params for s in clients])


def _with_head(theta: ParamVector, head: np.ndarray) -> ParamVector:
    v = theta.values.copy()
    v[theta.spec.head_slice] = head
    return ParamVector(v, theta.spec)


def run_hetero_arch(cfg: ExperimentConfig, trace: bool = False) -> History:
    """Clients in architecture groups that share only the classification head.

    Inside a group the full FedSaC server step runs on whole parameter
    vectors. Across groups, client ``i`` mixes its head with the heads of
    every other-group client using cooperation weights from the
    similarity term alone (complementarity dropped, alpha = 0).
    """
    ds = build_dataset(cfg)
    shards = build_shards(cfg, ds)
    n, T = len(shards), cfg.rounds
    groups = cfg.hetero.groups
    specs = [model_spec(cfg, ds, g) for g in groups]
    head_shapes = {sp.layer_dims[-1] for sp in specs}
    if len(head_shapes) != 1:
        raise InvalidInput(f"architecture groups have different head shapes: {sorted(head_shapes)}")
    group_of = np.array([i * len(groups) // n for i in range(n)])
    init = [initial_params(cfg, sp, g) for g, sp in enumerate(specs)]
    clients = make_clients(cfg, shards, [init[g] for g in group_of])
    aggregated = [init[g] for g in group_of]
    c, sv = cfg.client, cfg.server
    sizes = np.array([s.num_train for s in clients], dtype=np.float64)
    records = []
    for t in range(T):
        cohort = _cohort(cfg, t)
        reports = dict(zip(cohort, _map_clients(
            lambda i: cl.local_round(clients[i], aggregated[i], c.lam, sv.k, c.subsample_m, t),
            list(cohort), cfg.workers, t,
        )))
        alpha = server.effective_alpha(t, T, sv)
        w_body = np.zeros((n, n))
        within = {}
        for g in range(len(groups)):
            members = [i for i in cohort if group_of[i] == g]
            if not members:
                continue
            step = server.server_step([reports[i] for i in members], alpha, sv.beta)
            w_body[np.ix_(members, members)] = step.w
            within.update(zip(members, step.aggregated))

        w_head = np.zeros((n, n))
        heads = {i: within[i].head for i in cohort}
        for i in cohort:
            peers = [i] + [j for j in cohort if group_of[j] != group_of[i]]
            p = sizes[peers] / sizes[peers].sum()
            s = server.similarity_matrix([heads[j] for j in peers])
            row = server.solve_row(0, p, s, np.zeros_like(s), 0.0, sv.beta)
            w_head[i, peers] = row
            aggregated[i] = _with_head(within[i], row @ np.stack([heads[j] for j in peers]))

        acc = [cl.evaluate(s) for s in clients]
        rec = _record(t, acc, cohort, w_head=w_head[np.ix_(cohort, cohort)], group_of=group_of)
        if trace:
            rec.w = w_body[np.ix_(cohort, cohort)]
        records.append(rec)
    return History("hetero", records, aggregated)


RUNNERS = {
    "fedsac": run_fedsac,
    "fedavg": run_fedavg,
    "local": run_local,
    "hetero": run_hetero_arch,
}


def run(cfg: ExperimentConfig, trace: bool = False) -> History:
    return RUNNERS[cfg.method](cfg, trace)


# --------------------------------------------------------------------------
# two-client complementarity sweep


SWEEP_COLUMNS = (
    "level", "local_accuracy", "coop_accuracy", "similarity", "complementarity", "peer_weight",
)


def run_complementarity_sweep(cfg: ExperimentConfig, levels, kind: str = "covariate") -> list[dict]:
    """Two clients; the second one's data is shifted by each level in turn.

    Client 1 always draws from the unshifted distribution, client 2 from
    ``ShiftSpec(covariate=level)`` (or ``concept=level``) with the same noise
    draws at every level. Both train one round from a common initial model;
    the server then computes S, C and the cooperation weights with equal
    relative sizes and aggregates once. Each row reports mean accuracy of
    the locally trained models and of the aggregated models on their own
    test splits, plus S_12, C_12 and the mean off-diagonal weight.
    """
    levels = [float(v) for v in levels]
    if not levels or levels[0] != 0 or any(b < a for a, b in zip(levels, levels[1:])):
        raise InvalidInput("levels must be ascending and start at 0")
    if kind not in ("covariate", "concept"):
        raise InvalidInput("kind must be 'covariate' or 'concept'")
    d, c, sv = cfg.dataset, cfg.client, cfg.server

    def dataset(which, level):
        shift = data.ShiftSpec(level, 0.0) if kind == "covariate" else data.ShiftSpec(0.0, level)
        return data.generate_synthetic(
            data.derive_seed(cfg.seed, _DATA, which), d.num_classes, d.feature_dim,
            d.samples_per_class, shift, class_sep=d.class_sep, shift_scale=d.shift_scale, noise=d.noise,
        )

    base = dataset(0, 0.0)
    spec = model_spec(cfg, base)
    theta0 = initial_params(cfg, spec)
    p = np.array([0.5, 0.5])
    rows = []
    for level in levels:
        sets = [base, dataset(1, level)]
        shards = [
            data.partition_homogeneous(ds, 1, data.derive_seed(cfg.seed, _PARTITION, which))[0]
            for which, ds in enumerate(sets)
        ]
        shards = [data.ClientShard(i, sh.train, sh.test, 0.5, sh.train_index, sh.test_index)
                  for i, sh in enumerate(shards)]
        clients = make_clients(cfg, shards, [theta0, theta0])
        reports = [cl.local_round(st, theta0, c.lam, sv.k, c.subsample_m, 0) for st in clients]
        params = [r.params for r in reports]
        s = server.similarity_matrix(params)
        cm = server.complementarity_matrix([r.subspace for r in reports])
        w = server.cooperation_matrix(p, s, cm, sv.alpha, sv.beta)
        agg = server.aggregate(w, params)
        rows.append({
            "level": level,
            "local_accuracy": float(np.mean([cl.evaluate(st) for st in clients])),
            "coop_accuracy": float(np.mean([cl.evaluate(st, a) for st, a in zip(clients, agg)])),
            "similarity": float(s[0, 1]),
            "complementarity": float(cm[0, 1]),
            "peer_weight": float((w[0, 1] + w[1, 0]) / 2),
        })
    return rows
