import dataclasses
import math

import numpy as np
import pytest
import torch

from vlseg.data.synthetic import blob_samples
from vlseg.models import build_variant, parameter_vector, tiny_config
from vlseg.training import (
    ConstantScheduler,
    CosineScheduler,
    EarlyStopping,
    PlateauScheduler,
    SearchGrid,
    TrainConfig,
    TrainingDivergedError,
    bce_from_logits,
    baseline_recipe,
    combined_loss,
    dice_loss,
    dice_only_loss,
    fit,
    load_train_config,
    make_scheduler,
    read_history,
    recipe_for,
)
from vlseg.training.trainer import draw_prompts, epoch_rng


@pytest.fixture(scope="module")
def small_data():
    return blob_samples(6, side=16, cell=2, seed=3), blob_samples(3, side=16, cell=2, seed=4)


def small_config(**kw):
    base = dict(lr=5e-3, batch_size=4, max_epochs=4, early_stop_patience=50)
    base.update(kw)
    return TrainConfig(**base)


# ---------------------------------------------------------------------- losses


def test_dice_loss_examples():
    t = torch.tensor([[1.0, 0.0]])
    assert float(dice_loss(t, t, smooth=0.0)) == pytest.approx(0.0)
    assert float(dice_loss(1 - t, t, smooth=0.0)) == pytest.approx(1.0)
    # empty target and empty prediction with smoothing: no penalty
    z = torch.zeros(1, 4)
    assert float(dice_loss(z, z)) == pytest.approx(0.0)
    # a 1-D input is a single sample
    assert float(dice_loss(torch.full((4,), 0.5), torch.tensor([1.0, 1, 0, 0]))) == pytest.approx(0.4)


def test_dice_loss_is_a_batch_mean():
    a = torch.tensor([[1.0, 1.0], [0.0, 0.0]])
    t = torch.tensor([[1.0, 1.0], [1.0, 1.0]])
    per = [float(dice_loss(a[i:i + 1], t[i:i + 1])) for i in range(2)]
    assert float(dice_loss(a, t)) == pytest.approx(sum(per) / 2)


def test_loss_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        dice_loss(torch.zeros(1, 4), torch.zeros(1, 5))
    with pytest.raises(ValueError):
        bce_from_logits(torch.zeros(2), torch.zeros(3))


def test_bce_clamps_extreme_logits():
    # float64 so that 1 - 1e-7 is representable
    logit, target = torch.tensor([100.0], dtype=torch.float64), torch.tensor([0.0], dtype=torch.float64)
    value = float(bce_from_logits(logit, target))
    assert math.isfinite(value)
    assert value == pytest.approx(-math.log(1e-7), rel=1e-3)


def test_combined_and_dice_only():
    logits = torch.randn(3, 1, 4, 4)
    target = (torch.rand(3, 1, 4, 4) > 0.5).float()
    expected = dice_loss(torch.sigmoid(logits), target) + 0.2 * bce_from_logits(logits, target)
    assert torch.allclose(combined_loss(logits, target), expected)
    assert torch.allclose(dice_only_loss(logits, target), dice_loss(torch.sigmoid(logits), target))
    assert torch.allclose(combined_loss(logits, target, bce_weight=0.0), dice_only_loss(logits, target))


# ------------------------------------------------------------------ schedulers


def test_plateau_resets_on_improvement_and_compounds():
    s = PlateauScheduler(1.0, factor=0.5, patience=2)
    for m in [3, 2, 2, 1, 1, 1, 1, 1]:
        s.step(m)
    assert s.reductions == 2
    assert s.lr == 0.25
    clone = PlateauScheduler(1.0, factor=0.5, patience=2)
    clone.load_state_dict(s.state_dict())
    assert clone.lr == s.lr


def test_plateau_respects_min_lr():
    s = PlateauScheduler(1.0, factor=0.1, patience=1, min_lr=0.05)
    for _ in range(5):
        s.step(1.0)
    assert s.lr == 0.05


def test_scheduler_validation():
    with pytest.raises(ValueError):
        PlateauScheduler(1.0, factor=1.5)
    with pytest.raises(ValueError):
        PlateauScheduler(1.0, patience=0)
    with pytest.raises(ValueError, match="unknown scheduler"):
        make_scheduler("step", 1.0)


def test_cosine_and_constant():
    c = CosineScheduler(1.0, total_epochs=4)
    lrs = []
    for _ in range(5):
        lrs.append(c.lr)
        c.step(0.0)
    assert lrs[0] == 1.0 and lrs[2] == pytest.approx(0.5) and lrs[4] == pytest.approx(0.0)
    k = ConstantScheduler(0.3)
    k.step(1.0)
    assert k.lr == 0.3


def test_early_stopping_counts_epochs_without_new_max():
    stop = EarlyStopping(3)
    decisions = [stop.step(m) for m in [0.1, 0.5, 0.5, 0.4, 0.5]]
    assert decisions == [False, False, False, False, True]


# ---------------------------------------------------------------------- config


def test_train_config_validation_and_roundtrip():
    cfg = TrainConfig(lr=1e-4)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(KeyError, match="unknown training keys"):
        TrainConfig.from_dict({"learning_rate": 1.0})
    for bad in (dict(lr=0), dict(batch_size=-1), dict(weight_decay=-1), dict(plateau_factor=1.0),
                dict(optimizer="sgd"), dict(scheduler="step"), dict(loss="focal")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_recipes():
    assert recipe_for("clipseg").lr == 2e-3 and recipe_for("clipseg").batch_size == 128
    assert recipe_for("biomedclipseg_d").early_stop_patience == 50
    cris = recipe_for("cris")
    assert (cris.lr, cris.batch_size, cris.early_stop_patience) == (2e-5, 32, 10)
    assert cris.optimizer == "adamw" and cris.weight_decay == 1e-3 and cris.plateau_patience == 5
    unet = baseline_recipe()
    assert (unet.optimizer, unet.lr, unet.loss) == ("adam", 1e-3, "dice")
    with pytest.raises(KeyError):
        recipe_for("segformer")


def test_search_grid():
    grid = SearchGrid(lr_points=2)
    configs = grid.configs(TrainConfig())
    assert len(configs) == 2 * 2 * 4 * 3
    assert {c.lr for c in configs} == {1e-5, 1e-2}
    sampled = grid.sample(TrainConfig(), 20, seed=1)
    assert sampled == grid.sample(TrainConfig(), 20, seed=1)
    assert all(1e-5 <= c.lr <= 1e-2 for c in sampled)
    assert SearchGrid.from_dict(grid.to_dict()) == grid
    with pytest.raises(ValueError):
        SearchGrid(lr_range=(1e-2, 1e-5))


def test_load_train_config_yaml(tmp_path):
    path = tmp_path / "train.yaml"
    path.write_text("variant: cris\ntrain: {max_epochs: 40, seed: 3}\nsearch: {batch_sizes: [16, 32]}\nnote: x\n")
    loaded = load_train_config(path)
    assert loaded.variant == "cris"
    assert loaded.train.lr == 2e-5 and loaded.train.max_epochs == 40
    assert loaded.search.batch_sizes == (16, 32)
    assert loaded.extra == {"note": "x"}
    path.write_text('{"variant": "unet"}')
    assert load_train_config(path).train.loss == "dice"
    path.write_text("- 1\n")
    with pytest.raises(ValueError):
        load_train_config(path)


# ------------------------------------------------------------------------- fit


def test_prompt_draws_are_seeded(small_data):
    train, _ = small_data
    train = [dataclasses.replace(train[0], prompt_options=("a", "b", "c")), *train[1:]]
    idx = np.arange(len(train))
    first = draw_prompts(train, idx, epoch_rng(0, 1))
    assert first == draw_prompts(train, idx, epoch_rng(0, 1))
    assert first[0] in ("a", "b", "c")
    assert first[1:] == [t.prompt for t in train[1:]]


def test_fit_is_deterministic(small_data):
    train, val = small_data
    runs = []
    for _ in range(2):
        model = build_variant(tiny_config("clipseg", seed=1, input_side=16, context_length=24))
        result = fit(model, train, val, small_config())
        runs.append((result.history, parameter_vector(model)))
    for a, b in zip(runs[0][0], runs[1][0]):
        assert a.train_loss == pytest.approx(b.train_loss, abs=1e-6)
        assert a.val_dice == pytest.approx(b.val_dice, abs=1e-6)
    assert torch.allclose(runs[0][1], runs[1][1], atol=1e-6)


def test_fit_writes_artifacts_and_restores_best(small_data, tmp_path):
    train, val = small_data
    model = build_variant(tiny_config("cris", input_side=16, context_length=24))
    result = fit(model, train, val, small_config(max_epochs=3), out_dir=tmp_path)
    assert result.best_path.exists() and result.last_path.exists()
    history = read_history(tmp_path / "history.csv")
    assert [h.epoch for h in history] == [1, 2, 3]
    assert history[0].val_dice == pytest.approx(result.history[0].val_dice)
    best = max(result.history, key=lambda h: h.val_dice)
    assert result.state.best_epoch == best.epoch
    assert not model.training


def test_resume_matches_uninterrupted_run(small_data, tmp_path):
    train, val = small_data
    full_model = build_variant(tiny_config("clipseg", seed=2, input_side=16, context_length=24))
    full = fit(full_model, train, val, small_config(max_epochs=4), out_dir=tmp_path / "full")

    model = build_variant(tiny_config("clipseg", seed=2, input_side=16, context_length=24))
    fit(model, train, val, small_config(max_epochs=2), out_dir=tmp_path / "part")
    model = build_variant(tiny_config("clipseg", seed=2, input_side=16, context_length=24))
    resumed = fit(model, train, val, small_config(max_epochs=4), out_dir=tmp_path / "part", resume=True)
    assert resumed.start_epoch == 2 and resumed.epochs_run == 2
    for a, b in zip(full.history, resumed.history):
        assert a.train_loss == pytest.approx(b.train_loss, abs=1e-6)
    # a finished run resumes with zero new epochs
    again = fit(model, train, val, small_config(max_epochs=4), out_dir=tmp_path / "part", resume=True)
    assert again.epochs_run == 0


def test_early_stop_inside_fit(small_data):
    train, val = small_data
    model = build_variant(tiny_config("clipseg", input_side=16, context_length=24))
    result = fit(model, train, val, small_config(max_epochs=20, early_stop_patience=2),
                 validator=lambda m, v, c: (1.0, 0.5))
    assert result.state.stopped_early
    assert result.state.epoch == 3


def test_nan_loss_aborts(small_data):
    train, val = small_data
    model = build_variant(tiny_config("clipseg", input_side=16, context_length=24))
    with torch.no_grad():
        next(model.decoder.parameters()).fill_(float("nan"))
    with pytest.raises(TrainingDivergedError) as err:
        fit(model, train, val, small_config())
    assert err.value.epoch == 1 and err.value.batch == 0


def test_fit_guards(small_data):
    train, val = small_data
    model = build_variant(tiny_config("clipseg", input_side=16, context_length=24))
    with pytest.raises(ValueError, match="training split"):
        fit(model, [], val, small_config())
    with pytest.raises(ValueError, match="validation split"):
        fit(model, train, [], small_config())
    for p in model.parameters():
        p.requires_grad_(False)
    with pytest.raises(ValueError, match="no trainable"):
        fit(model, train, val, small_config())
