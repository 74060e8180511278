import dataclasses
import json
import os

import numpy as np
import pytest

from fedsac.errors import ConfigError, InvalidInput, OutputError
from fedsac.harness import config as hc
from fedsac.harness import outputs, runner
from fedsac.harness.config import ExperimentConfig


def small(**changes) -> ExperimentConfig:
    base = ExperimentConfig(num_clients=4, rounds=3, seed=1).replace(
        dataset__samples_per_class=40, dataset__feature_dim=8, dataset__num_classes=4,
        client__local_iters=15, partition__alpha=0.5,
    )
    return base.replace(**changes)


def flat(models):
    return np.stack([m.values for m in models])


# --------------------------------------------------------------------------
# method runs


def test_fedsac_reduces_to_fedavg():
    cfg = small(server__alpha=0.0, server__beta=0.0, client__lam=0.0)
    a = runner.run_fedsac(cfg, trace=True)
    b = runner.run_fedavg(cfg.replace(method="fedavg"))
    for rec in a:
        p = np.array([s for s in rec.w[0]])
        np.testing.assert_allclose(rec.w, np.tile(p, (4, 1)), atol=1e-9)
    np.testing.assert_allclose(flat(a.final_models), flat(b.final_models), atol=1e-6)


def test_fedavg_global_model_shared():
    h = runner.run_fedavg(small(method="fedavg"))
    models = flat(h.final_models)
    assert np.all(models == models[0])


def test_single_client_is_local_training():
    cfg = small(num_clients=1, partition__scheme="homo", client__lam=0.01)
    h = runner.run_fedsac(cfg, trace=True)
    loc = runner.run_local(cfg.replace(method="local", client__lam=0.0))
    for rec in h:
        np.testing.assert_array_equal(rec.w, [[1.0]])
    # The anchor term still pulls during training, so exact equality with
    # local training needs lambda = 0.
    h0 = runner.run_fedsac(cfg.replace(client__lam=0.0))
    np.testing.assert_allclose(flat(h0.final_models), flat(loc.final_models), atol=1e-12)
    avg = runner.run_fedavg(cfg.replace(method="fedavg"))
    np.testing.assert_allclose(flat(avg.final_models), flat(loc.final_models), atol=1e-12)


def test_history_shape_and_records():
    h = runner.run(small(), trace=True)
    assert len(h) == 3 and h.method == "fedsac"
    for t, rec in enumerate(h):
        assert rec.round == t
        assert rec.per_client_accuracy.shape == (4,)
        assert np.all((0 <= rec.per_client_accuracy) & (rec.per_client_accuracy <= 1))
        assert rec.mean_accuracy == pytest.approx(rec.per_client_accuracy.mean())
        assert rec.w.shape == rec.s.shape == rec.c.shape == (4, 4)
        np.testing.assert_allclose(rec.w.sum(axis=1), 1.0, atol=1e-9)
    assert h.mean_curve().shape == (3,)
    untraced = runner.run(small())
    assert untraced[0].w is None


@pytest.mark.parametrize("method", ["fedsac", "fedavg", "local", "hetero"])
def test_runs_are_deterministic(method):
    cfg = small(method=method, hetero__groups=((16,), (12, 16)))
    a, b = runner.run(cfg), runner.run(cfg)
    np.testing.assert_array_equal(flat(a.final_models) if method != "hetero" else a.mean_curve(),
                                  flat(b.final_models) if method != "hetero" else b.mean_curve())
    assert outputs.metrics_csv(a) == outputs.metrics_csv(b)


def test_parallel_workers_match_serial():
    cfg = small()
    a = runner.run_fedsac(cfg)
    b = runner.run_fedsac(cfg.replace(workers=3))
    assert outputs.metrics_csv(a) == outputs.metrics_csv(b)
    np.testing.assert_array_equal(flat(a.final_models), flat(b.final_models))


def test_subsampled_rounds():
    cfg = small(num_clients=8, server__subsample=3, rounds=4)
    h = runner.run_fedsac(cfg, trace=True)
    for rec in h:
        assert rec.participants.size == 3
        assert rec.w.shape == (3, 3)
        assert rec.mean_accuracy == pytest.approx(rec.per_client_accuracy[rec.participants].mean())
    assert outputs.metrics_csv(h).count("\n") == 1 + 4 * 3


def test_errors_carry_round_and_client_context():
    # k larger than the feature sample count fails inside a client
    cfg = small(client__subsample_m=2, server__k=3)
    with pytest.raises(InvalidInput, match="round 0, client 0"):
        runner.run_fedsac(cfg)


# --------------------------------------------------------------------------
# heterogeneous architectures


def test_hetero_single_group_equals_fedsac():
    cfg = small(method="hetero", hetero__groups=((84,),))
    a = runner.run_hetero_arch(cfg)
    b = runner.run_fedsac(cfg.replace(method="fedsac"))
    np.testing.assert_allclose(flat(a.final_models), flat(b.final_models), atol=1e-6)


def test_hetero_identical_groups_mix_heads_only():
    cfg = small(method="hetero", hetero__groups=((16,), (16,)), rounds=2)
    h = runner.run_hetero_arch(cfg, trace=True)
    for rec in h:
        g = rec.extra["group_of"]
        w_body = rec.w
        # bodies never cross groups
        assert np.all(w_body[np.ix_(g == 0, g == 1)] == 0) and np.all(w_body[np.ix_(g == 1, g == 0)] == 0)
        w_head = rec.extra["w_head"]
        np.testing.assert_allclose(w_head.sum(axis=1), 1.0, atol=1e-9)
        # head rows never use same-group peers other than the client itself
        for i in range(4):
            same = [j for j in range(4) if g[j] == g[i] and j != i]
            assert np.all(w_head[i, same] == 0)


def test_hetero_bodies_isolated_across_groups():
    cfg = small(method="hetero", hetero__groups=((16,), (12, 16)))
    h = runner.run_hetero_arch(cfg)
    g = h.records[0].extra["group_of"]
    specs = [m.spec for m in h.final_models]
    assert specs[0] != specs[-1]
    for i, m in enumerate(h.final_models):
        assert m.spec.hidden_dims == cfg.hetero.groups[g[i]]
    # After one server phase, group 0 bodies do not depend on group 1 at all:
    # changing group 1's architecture leaves them bit-identical. (In later
    # rounds the mixed heads feed back into body training, as intended.)
    one = cfg.replace(rounds=1)
    h = runner.run_hetero_arch(one)
    h2 = runner.run_hetero_arch(one.replace(hetero__groups=((16,), (20, 16))))
    for i in np.nonzero(g == 0)[0]:
        a, b = h.final_models[i], h2.final_models[i]
        body = slice(0, a.spec.head_slice.start)
        np.testing.assert_array_equal(a.values[body], b.values[body])


def test_hetero_rejects_mismatched_heads():
    cfg = small(method="hetero", hetero__groups=((16,), (12, 20)))
    with pytest.raises(InvalidInput, match="head"):
        runner.run_hetero_arch(cfg)


# --------------------------------------------------------------------------
# sweep


def test_sweep_rows_and_validation():
    cfg = small(client__local_iters=20)
    rows = runner.run_complementarity_sweep(cfg, [0, 0.5, 1.0])
    assert [r["level"] for r in rows] == [0, 0.5, 1.0]
    assert set(rows[0]) == set(runner.SWEEP_COLUMNS)
    for r in rows:
        assert 0 <= r["coop_accuracy"] <= 1 and -1 <= r["similarity"] <= 1
    with pytest.raises(InvalidInput):
        runner.run_complementarity_sweep(cfg, [0.5, 1.0])
    with pytest.raises(InvalidInput):
        runner.run_complementarity_sweep(cfg, [0, 1.0], kind="label")


def test_concept_sweep_full_shift_hurts():
    cfg = ExperimentConfig(seed=0).replace(dataset__samples_per_class=20)
    rows = runner.run_complementarity_sweep(cfg, [0, 1.0], kind="concept")
    assert rows[-1]["coop_accuracy"] <= rows[-1]["local_accuracy"]


# --------------------------------------------------------------------------
# outputs


def test_emit_outputs(tmp_path):
    cfg = small(output_dir=str(tmp_path / "run"))
    h = runner.run_fedsac(cfg, trace=True)
    out = outputs.emit_outputs(h, cfg)
    assert json.loads((out / "run_config.json").read_text()) == hc.to_dict(cfg)
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "round,client,accuracy" and len(lines) == 1 + 3 * 4
    for t in range(3):
        for name in "WSC":
            m = np.loadtxt(out / "matrices" / str(t) / f"{name}.csv", delimiter=",")
            np.testing.assert_allclose(m, getattr(h[t], name.lower()), rtol=1e-8)
            svg = (out / f"heatmap_{name}_{t}.svg").read_text()
            assert svg.count("<rect") == 16 and svg.startswith("<svg")
        w = np.loadtxt(out / "matrices" / str(t) / "W.csv", delimiter=",")
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)
    models = np.load(out / "models.npz")
    np.testing.assert_array_equal(models["client_0"], h.final_models[0].values)
    first = (out / "metrics.csv").read_bytes()
    outputs.emit_outputs(runner.run_fedsac(cfg, trace=True), cfg)
    assert (out / "metrics.csv").read_bytes() == first


def test_heatmap_annotation_threshold():
    small_svg = outputs.heatmap_svg(np.eye(12))
    big_svg = outputs.heatmap_svg(np.eye(13))
    assert small_svg.count("<text") == 144
    assert big_svg.count("<text") == 0
    # grayscale: maximum is black, minimum white
    assert 'fill="rgb(0,0,0)"' in small_svg and 'fill="rgb(255,255,255)"' in small_svg
    assert outputs.heatmap_svg(np.ones((2, 2))).count("rgb(255,255,255)") == 4


def test_emit_outputs_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small(output_dir=str(blocker / "sub"))
    h = runner.run_local(cfg.replace(method="local", rounds=1))
    with pytest.raises(OutputError):
        outputs.emit_outputs(h, cfg)
    if os.geteuid() != 0:
        ro = tmp_path / "ro"
        ro.mkdir(mode=0o500)
        with pytest.raises(OutputError):
            outputs.emit_outputs(h, cfg, ro)


def test_emit_outputs_empty_history(tmp_path):
    with pytest.raises(InvalidInput):
        outputs.emit_outputs(runner.History("fedsac", [], []), small(), tmp_path)


def test_compare_csv_pads_short_curves():
    text = outputs.compare_csv({"a": np.array([0.5, 0.6]), "b": np.array([0.1])})
    assert text.splitlines() == ["round,a,b", "0,0.5,0.1", "1,0.6,"]


# --------------------------------------------------------------------------
# config


CONFIG_TEXT = """
[experiment]
method = fedsac
num_clients = 6
rounds = 4
seed = 3

[dataset]
num_classes = 5
class_sep = 2.5

[partition]
scheme = pathological
classes_per_client = 2

[model]
hidden_dims = 32, 84

[server]
alpha = 0.5
beta = 1.6
subsample = none

[hetero]
groups = 84; 64, 84
"""


def test_parse_config():
    cfg = hc.parse_config(CONFIG_TEXT)
    assert cfg.num_clients == 6 and cfg.seed == 3
    assert cfg.dataset.num_classes == 5 and cfg.dataset.class_sep == 2.5
    assert cfg.partition.scheme == "pathological"
    assert cfg.model.hidden_dims == (32, 84)
    assert cfg.server.alpha == 0.5 and cfg.server.subsample is None
    assert cfg.hetero.groups == ((84,), (64, 84))
    assert cfg.client == hc.ClientConfig()


def test_config_round_trips():
    cfg = hc.parse_config(CONFIG_TEXT).replace(server__subsample=4, client__lr=0.125)
    assert hc.parse_config(hc.to_ini(cfg)) == cfg
    assert hc.canonical_json(cfg) == hc.canonical_json(hc.parse_config(hc.to_ini(cfg)))


@pytest.mark.parametrize(
    "text",
    [
        "[experiment]\nmethod = sgd\n",
        "[experiment]\nrounds = 0\n",
        "[experiment]\nrounds = three\n",
        "[bogus]\nx = 1\n",
        "[client]\nmomentum = 0.9\n",
        "[server]\nalpha = -1\n",
        "[partition]\nscheme = zipf\n",
        "[dataset]\nsource = idx\n",
        "not an ini file",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        hc.parse_config(text)


def test_load_config_overrides(tmp_path, monkeypatch):
    path = tmp_path / "c.ini"
    path.write_text(CONFIG_TEXT)
    monkeypatch.delenv(hc.OUTPUT_DIR_ENV, raising=False)
    assert hc.load_config(path).output_dir == "runs/default"
    assert hc.load_config(path, seed=9).seed == 9
    monkeypatch.setenv(hc.OUTPUT_DIR_ENV, str(tmp_path / "env"))
    cfg = hc.load_config(path)
    assert cfg.output_dir == str(tmp_path / "env")
    # the environment only redirects output
    assert dataclasses.replace(cfg, output_dir="runs/default") == hc.load_config(path).replace(output_dir="runs/default")
    with pytest.raises(ConfigError):
        hc.load_config(tmp_path / "missing.ini")
