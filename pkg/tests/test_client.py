import numpy as np
import pytest

from oracles import binomial_band

from fedsac import client as cl
from fedsac import data, model
from fedsac.data import ClientShard, LabeledDataset
from fedsac.errors import DimensionMismatch, InvalidInput
from fedsac.model import MlpSpec
from fedsac.numerics import cosine


def make_state(seed=0, spc=60, c=4, f=6, iters=50, lr=0.05, hidden=(84,), shift=None):
    ds = data.generate_synthetic(seed, c, f, spc, shift)
    (shard,) = data.partition_homogeneous(ds, 1, seed)
    params = model.init(MlpSpec(f, c, hidden), seed)
    return cl.ClientState(0, shard, params, seed, local_iters=iters, lr=lr)


def test_zero_iters_reports_aggregated():
    st = make_state(iters=0)
    agg = model.init(st.params.spec, 99)
    rep = cl.local_round(st, agg, 0.01, 3)
    assert rep.params == agg
    assert rep.subspace.ambient_dim == 84 and rep.subspace.k == 3
    assert rep.num_train == len(st.shard.train)


def test_separable_toy_reaches_high_train_accuracy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 2))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(np.int64)
    # Margin keeps the task cleanly linearly separable.
    keep = np.abs(x[:, 0] + 0.5 * x[:, 1]) > 0.2
    ds = LabeledDataset(x[keep], y[keep], 2)
    (shard,) = data.partition_homogeneous(ds, 1, 0)
    st = cl.ClientState(0, shard, model.init(MlpSpec(2, 2), 0), 0, local_iters=1000, lr=0.1)
    cl.local_round(st, st.params, 0.0, 3)
    assert cl.accuracy(st.params, shard.train) >= 0.95


def test_same_seeds_bit_identical():
    reports = []
    for _ in range(2):
        st = make_state(seed=5)
        reports.append(cl.local_round(st, st.params, 0.01, 3, round_index=2))
    a, b = reports
    assert a.params == b.params
    np.testing.assert_array_equal(a.subspace.basis, b.subspace.basis)


def test_rounds_use_different_batches():
    st1, st2 = make_state(seed=1), make_state(seed=1)
    a = cl.local_round(st1, st1.params, 0.0, 3, round_index=0)
    b = cl.local_round(st2, st2.params, 0.0, 3, round_index=1)
    assert a.params != b.params


def test_random_params_near_chance():
    c, n = 5, 2000
    rng = np.random.default_rng(3)
    x = rng.normal(size=(n, 8))
    y = np.tile(np.arange(c), n // c)
    rng.shuffle(y)
    test = LabeledDataset(x, y, c)
    params = model.init(MlpSpec(8, c), 3)
    lo, hi = binomial_band(n, 1 / c)
    assert lo / n <= cl.accuracy(params, test) <= hi / n


def test_single_sample_accuracy_is_binary():
    st = make_state()
    one = st.shard.test.subset([0])
    assert cl.accuracy(st.params, one) in (0.0, 1.0)
    assert cl.accuracy(st.params, one) == cl.accuracy(st.params, one)


def test_evaluate_empty_test_raises():
    st = make_state()
    empty = st.shard.test.subset(np.array([], dtype=np.int64))
    with pytest.raises(InvalidInput):
        cl.accuracy(st.params, empty)


def test_anchor_pulls_towards_aggregate():
    for seed in range(3):
        far = model.init(MlpSpec(6, 4), 1000 + seed)
        sims = {}
        for lam in (0.0, 10.0):
            st = make_state(seed=seed, iters=100)
            rep = cl.local_round(st, far, lam, 3)
            sims[lam] = cosine(rep.params.values, far.values)
        assert sims[10.0] >= sims[0.0]


def test_local_round_checks():
    st = make_state()
    with pytest.raises(DimensionMismatch):
        cl.local_round(st, model.init(MlpSpec(6, 4, (10,)), 0), 0.0, 3)
    with pytest.raises(InvalidInput):
        cl.local_round(st, st.params, 0.0, 85)
    with pytest.raises(InvalidInput):
        cl.local_round(st, st.params, 0.0, 5, subsample_m=4)


def test_shard_too_small_for_k():
    ds = data.generate_synthetic(0, 2, 3, 2)  # 4 samples -> 3 train after the split
    (shard,) = data.partition_homogeneous(ds, 1, 0)
    st = cl.ClientState(0, shard, model.init(MlpSpec(3, 2), 0), 0, local_iters=1)
    with pytest.raises(InvalidInput):
        cl.local_round(st, st.params, 0.0, 4)


def test_batch_size_clamped_and_state_checks():
    st = make_state(spc=5, c=2)
    assert st.batch_size == len(st.shard.train)
    shard = st.shard
    with pytest.raises(InvalidInput):
        cl.ClientState(0, shard, st.params, 0, lr=0.0)
    with pytest.raises(InvalidInput):
        cl.ClientState(0, shard, st.params, 0, local_iters=-1)
    empty = ClientShard(0, shard.train.subset(np.array([], dtype=np.int64)), shard.test, 1.0,
                        np.array([], dtype=np.int64), shard.test_index)
    with pytest.raises(InvalidInput):
        cl.ClientState(0, empty, st.params, 0)


def test_subspace_uses_only_features():
    # Shuffling labels leaves the extracted subspace unchanged when no training happens.
    st = make_state(iters=0)
    rep1 = cl.local_round(st, st.params, 0.0, 3)
    tr = st.shard.train
    shuffled = LabeledDataset(tr.features, np.roll(tr.labels, 1), tr.num_classes)
    st2 = cl.ClientState(0, ClientShard(0, shuffled, st.shard.test, 1.0, None, None), st.params, st.seed, 0)
    rep2 = cl.local_round(st2, st.params, 0.0, 3)
    np.testing.assert_array_equal(rep1.subspace.basis, rep2.subspace.basis)
