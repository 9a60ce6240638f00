"""The named presets pin the benchmarked experiment scales."""

from subspaceopt.bench import PRESETS


def test_quadratic_suite_scale():
    p = PRESETS["quadratic-suite"]
    assert len(p["seeds"]) == 50
    assert p["dim"] == 100
    assert p["d"] == 10
    assert p["iters"] == 60


def test_rosenbrock_presets_encode_300_steps():
    assert PRESETS["rosenbrock-bench"]["iters"] == 300
    assert PRESETS["rosenbrock-train"]["steps"] == 300


def test_robust_regression_eval_has_100_tasks():
    assert PRESETS["robust-regression-eval"]["n_tasks"] == 100


def test_robust_regression_reduced_training_scale():
    p = PRESETS["robust-regression-train"]
    assert (p["episodes"], p["steps"], p["n_train_tasks"]) == (200, 100, 10)
    assert (p["d"], p["h"], p["lr"], p["gamma"]) == (10, 5, 5e-3, 1.0)


def test_reduced_classifier_scale():
    p = PRESETS["mnist-reduced"]
    assert p["digits"] == (0, 1)
    assert p["n_images"] == 1000
    assert p["hidden_units"] == 10
    assert p["batch_size"] == 256
    assert (p["episodes"], p["epochs"]) == (50, 2)


def test_delta_sweep_covers_all_ten_slots():
    assert PRESETS["delta-sweep"]["optimizers"] == [f"delta-{i}" for i in range(10)]


def test_all_presets_name_a_command():
    for name, p in PRESETS.items():
        assert p["command"] in ("run", "compare", "train", "evaluate"), name
