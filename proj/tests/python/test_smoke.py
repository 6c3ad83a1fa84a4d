import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

import sparselab


def test_psi_roundtrip_and_identity():
    theta = np.array([-8.0, 0.0, 2.25, 1e-4])
    phi = sparselab.psi_inverse(theta, 3.0)
    assert phi[0] == pytest.approx(-2.0)
    back = sparselab.psi(phi, 3.0)
    np.testing.assert_allclose(back, theta, atol=1e-12)
    np.testing.assert_array_equal(sparselab.psi(theta, 1.0), theta)


def test_grad_scale_critical_point():
    g = sparselab.grad_scale(np.array([5.0, 5.0]), np.array([0.0, 0.5]), 2.0)
    assert g[0] == 0.0
    assert g[1] == pytest.approx(5.0)


def test_matmul_and_topk():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(sparselab.matmul(a, np.eye(2)), a)
    idx = sparselab.topk_indices_by_magnitude(np.array([0.1, -0.9, 0.5]), 2)
    assert list(idx) == [1, 2]


def test_sample_gaussian_deterministic():
    a = sparselab.sample_gaussian(7, 3, 4)
    b = sparselab.sample_gaussian(7, 3, 4)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (3, 4)


def test_magnitude_mask_bits():
    bits = sparselab.magnitude_mask_bits([np.array([[0.1, -0.9, 0.5, 0.05]])], 0.5)
    np.testing.assert_array_equal(bits[0], [[0.0, 1.0, 1.0, 0.0]])


def test_train_and_sweep_end_to_end():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = {
            "widths": [784, 16, 10],
            "mode": "powerprop-virtual-target",
            "alpha": 2.0,
            "optimizer": "momentum",
            "lr": 0.01,
            "batch_size": 20,
            "steps": 60,
            "eval_interval": 30,
            "keep_fractions": [1.0, 0.2],
            "synth_train": 300,
            "synth_test": 60,
            "out_dir": str(Path(tmp) / "run"),
        }
        out = sparselab.train(cfg)
        assert Path(out["checkpoint"]).exists()
        assert 0.0 <= out["final_test_accuracy"] <= 1.0

        sweep = sparselab.prune_sweep(cfg, out["checkpoint"])
        assert len(sweep["reports"]) == 2
        assert sweep["reports"][0]["keep_fraction"] == 1.0
        assert sweep["reports"][0]["accuracy"] == pytest.approx(
            out["final_test_accuracy"]
        )

        # rerun with the same seed: identical result
        cfg2 = dict(cfg, out_dir=str(Path(tmp) / "run2"))
        out2 = sparselab.train(cfg2)
        assert out2["final_test_accuracy"] == out["final_test_accuracy"]


def test_continual_two_tasks_zero_forgetting():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = {
            "widths": [784, 16, 10],
            "mode": "powerprop-virtual-target",
            "alpha": 1.5,
            "optimizer": "sgd",
            "lr": 0.05,
            "batch_size": 16,
            "task_kind": "permuted",
            "tasks": 2,
            "steps_per_task": 60,
            "retrain_steps": 10,
            "gamma": 0.5,
            "keep_schedule": [0.2, 0.5, 0.9],
            "validation_count": 50,
            "synth_train": 300,
            "synth_test": 60,
            "out_dir": str(Path(tmp) / "cl"),
        }
        out = sparselab.continual(cfg)
        matrix = out["accuracy_matrix"]
        assert len(matrix) == 2
        assert matrix[1][0] == matrix[0][0]  # zero forgetting, bitwise
        assert 0.0 < out["protected_fraction"][-1] <= 1.0

        inference = sparselab.infer_task(
            dict(cfg, out_dir=str(Path(tmp) / "inf")), out["state_dir"]
        )
        assert inference["examples"] == 120
        assert inference["max_rounds"] <= 1


def test_config_errors_surface_as_exceptions():
    with pytest.raises(sparselab.ConfigError):
        sparselab.train({"mode": "sideways", "out_dir": "x"})
    with pytest.raises(sparselab.ConfigError):
        sparselab.preset("nope")


def test_presets_exposed():
    names = sparselab.preset_names()
    assert "mnist-fig1" in names
    cfg = sparselab.preset("mnist-fig1")
    assert cfg["lr"] == pytest.approx(0.0025)
    assert cfg["batch_size"] == 60
    assert math.isclose(sparselab.default_keep_schedule()[0], 0.01)
