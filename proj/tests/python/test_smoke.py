"""Smoke tests for the Python bindings."""

import json
import pathlib
import tempfile

import numpy as np
import pytest

import ztseg


def test_synthetic_generation_and_split():
    raw = ztseg.generate_synthetic(500, attack_fraction=0.1, n_protocols=3, seed=11)
    assert raw.n_rows == 500
    assert sum(raw.sidecar.label) == 50
    split = ztseg.split_80_10_10(500, seed=3)
    assert len(split.train_idx) == 400
    assert len(split.val_idx) == 50
    assert len(split.test_idx) == 50


def test_preprocess_and_partition():
    raw = ztseg.generate_synthetic(400, seed=7)
    split = ztseg.split_80_10_10(400, seed=1)
    table = ztseg.fit_preprocess(raw, split.train_idx)
    x = np.asarray(table.features)
    assert x.shape[0] == 400
    assert x.shape[1] == len(table.feature_names)
    shards = ztseg.dirichlet_partition(raw, split.train_idx, k=4, alpha=0.7, seed=5)
    rows = sorted(r for s in shards for r in s.row_indices)
    assert rows == sorted(split.train_idx)


def test_train_encode_cluster_round_trip():
    raw = ztseg.generate_synthetic(400, attack_fraction=0.1, mean_shift=6.0, seed=9)
    split = ztseg.split_80_10_10(400, seed=2)
    table = ztseg.fit_preprocess(raw, split.train_idx)
    shards = ztseg.dirichlet_partition(raw, split.train_idx, k=3, alpha=0.7, seed=4)

    cfg = ztseg.TrainConfig()
    cfg.rounds = 2
    cfg.local_epochs = 1
    cfg.batch_size = 32
    cfg.seed = 6
    model, logs = ztseg.train_federated(table, shards, split.val_idx, cfg,
                                        latent_dim=6, encoder_hidden=[16], decoder_hidden=[12])
    assert model.latent_dim == 6
    assert len(logs) == 2
    assert logs[-1]["train_benign_mse"] >= 0.0

    z = np.asarray(ztseg.encode(model, np.asarray(table.features)))
    assert z.shape == (400, 6)

    hg = ztseg.knn_hyperedges(z, k=6)
    assert all(len(e) == 7 for e in hg.edges)
    coords, eigenvalues, residuals = ztseg.spectral_embed(hg, d_emb=5, seed=3)
    coords = np.asarray(coords)
    assert coords.shape == (400, 5)
    assert max(residuals) <= 1e-6

    labels, outlierness, n_clusters = ztseg.hdbscan(coords, min_cluster_size=8)
    assert len(labels) == 400
    assert n_clusters >= 1
    assert 0.0 <= min(outlierness) and max(outlierness) <= 1.0


def test_risk_and_explain_ops():
    e = ztseg.robust_normalize(np.linspace(0.0, 3.0, 40))
    o = ztseg.robust_normalize(np.linspace(1.0, 9.0, 40))
    r = np.asarray(ztseg.instance_risk(e, o))
    assert r.min() >= 0.0 and r.max() <= 1.0
    risks = ztseg.cluster_risk(r, [i % 4 for i in range(40)])
    assert set(risks) == {0, 1, 2, 3}
    t = ztseg.otsu_threshold([0.1] * 30 + [0.9] * 30)
    assert abs(t - 0.5) < 0.01

    pts = np.vstack([np.random.RandomState(0).normal(0, 0.3, (30, 4)),
                     np.random.RandomState(1).normal(5, 0.3, (30, 4))])
    surrogate = ztseg.Surrogate(pts, [0] * 30 + [1] * 30, k=5)
    assert surrogate.predict(pts[2]) == 0
    lime_imp = np.asarray(ztseg.lime_explain(surrogate, pts[2], n_samples=300, seed=1))
    assert lime_imp.shape == (4,)
    shap_imp = np.asarray(ztseg.shap_explain(surrogate, pts[2], pts[30:50], exact=True))
    assert shap_imp.shape == (4,)
    assert ztseg.stability_score([["a", "b"], ["a", "b"]]) == 1.0


def test_run_pipeline_end_to_end(tmp_path):
    config = {
        "dataset": {"synthetic": {"n": 600, "attack_fraction": 0.1,
                                  "n_protocols": 2, "mean_shift": 6.0}},
        "clients": 3,
        "train": {"rounds": 2, "local_epochs": 1, "batch_size": 32, "latent_dim": 6,
                  "encoder_hidden": [16], "decoder_hidden": [12]},
        "hypergraph": {"mode": "manifold_hypergraph", "k": 6, "t": 2},
        "embedding": {"d_emb": 5},
        "clustering": {"clusterer": "hdbscan", "min_cluster_size": 8},
        "explain": {"enabled": True, "sample": 4, "lime_samples": 200, "background": 25},
        "seed": 21,
        "output_dir": str(tmp_path / "out"),
    }
    result = ztseg.run(config)
    stages = {t["stage"] for t in result["timings"]}
    assert stages == {"ingest", "train", "embed", "cluster", "risk",
                      "explain", "policy", "eval"}
    out = pathlib.Path(config["output_dir"])
    for artifact in ["policy.csv", "eval.json", "risk.json", "run_report.json"]:
        assert (out / artifact).exists(), artifact
    eval_report = json.loads((out / "eval.json").read_text())
    assert eval_report["security"]["weighted_purity"] >= 0.9

    # rerun skips every stage
    again = ztseg.run(config)
    assert all(t["skipped"] for t in again["timings"])


def test_config_validation_error():
    with pytest.raises(Exception, match="clusterer"):
        ztseg.run({"clustering": {"clusterer": "spectral"}, "output_dir": "/tmp/zz"})
