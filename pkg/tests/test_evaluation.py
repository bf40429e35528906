import numpy as np
import pytest
import torch
import torch.nn as nn

from vlseg.data import InputSpec, SampleTriplet, get_descriptor, register_dataset
from vlseg.data.synthetic import write_blob_dataset
from vlseg.evaluation import (
    CSV_COLUMNS,
    binarize,
    cross_dataset_eval,
    dice_score,
    evaluate,
    evaluate_split,
    predict_logits,
    predict_mask,
    prompt_type_charts,
    read_reports_csv,
    read_reports_json,
    triplet_dice,
    write_reports_csv,
    write_reports_json,
)
from vlseg.models import build_variant, save_checkpoint, toy_config

SIDE = 12
PLAIN = InputSpec(SIDE, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


class ConstantModel(nn.Module):
    input_spec = PLAIN

    def __init__(self, value: float):
        super().__init__()
        self.value = value

    def forward(self, images, prompts):
        return torch.full((images.shape[0], 1, 3, 3), self.value)


class OracleModel(nn.Module):
    """Reads the mask back out of the image; ``sign=-1`` predicts its complement."""

    input_spec = PLAIN

    def __init__(self, sign: float = 1.0):
        super().__init__()
        self.sign = sign

    def forward(self, images, prompts):
        return self.sign * 20.0 * (images[:, :1] - 0.5)


def white_on_black(n=4, seed=0, dataset="toy"):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        mask = np.zeros((SIDE, SIDE), np.uint8)
        r, c = rng.integers(0, SIDE - 4, size=2)
        mask[r:r + 4, c:c + 4] = 1
        image = np.repeat(mask[..., None] * 255, 3, axis=2).astype(np.uint8)
        out.append(SampleTriplet(f"s{i}", image, mask, "polyp", "polyp", dataset))
    return out


# --------------------------------------------------------------------- metrics


def test_dice_examples():
    a = np.array([[1, 1, 0, 0]])
    b = np.array([[1, 0, 0, 0]])
    assert dice_score(a, b) == pytest.approx(2 / 3)
    assert dice_score(a, a) == 1.0
    assert dice_score(a, 1 - a) == 0.0
    assert dice_score(np.array([[1, 1, 0, 0]]), np.array([[0, 1, 1, 0]])) == 0.5
    z = np.zeros((2, 2))
    assert dice_score(z, z) == 1.0
    assert dice_score(z, z, empty=0.0) == 0.0
    with pytest.raises(ValueError, match="shape"):
        dice_score(z, np.zeros((3, 3)))


def test_binarize_is_strict():
    assert binarize(torch.tensor([0.0, 1e-3, -1e-3])).tolist() == [False, True, False]


def test_constant_logits_predict_everything_or_nothing():
    image = np.zeros((7, 9, 3), np.uint8)
    assert predict_mask(ConstantModel(10.0), image, "x").tolist() == np.ones((7, 9)).tolist()
    assert predict_mask(ConstantModel(0.0), image, "x").sum() == 0


def test_predictions_restored_to_original_size():
    images = [np.zeros((5, 7, 3), np.uint8), np.zeros((20, 3, 3), np.uint8)]
    out = predict_logits(ConstantModel(1.0), images, ["a", "b"], batch_size=1)
    assert [tuple(o.shape) for o in out] == [(5, 7), (20, 3)]
    with pytest.raises(ValueError):
        predict_logits(ConstantModel(1.0), images, ["a"])


def test_predict_restores_training_mode():
    model = build_variant(toy_config())
    model.train()
    predict_logits(model, [np.zeros((64, 64, 3), np.uint8)], ["x"])
    assert model.training


def test_oracle_and_inverse_models():
    triplets = white_on_black()
    assert triplet_dice(OracleModel(), triplets) == [1.0] * 4
    assert evaluate(OracleModel(), triplets).mean == 100.0
    assert evaluate(OracleModel(-1.0), triplets).mean == 0.0
    assert evaluate(ConstantModel(-10.0), triplets).mean == 0.0


def test_evaluate_report_fields():
    triplets = white_on_black()
    rep = evaluate(OracleModel(), triplets, model_name="oracle", train_data="toy", ptype="P3", batch_size=3)
    assert rep.key == ("oracle", "toy", "toy", "P3", "none")
    assert rep.in_distribution
    assert rep.n == 4 and rep.std == 0.0
    assert rep.sample_keys[0] == "toy/s0/polyp"
    with pytest.raises(ValueError, match="nothing to evaluate"):
        evaluate(OracleModel(), [])


def test_prompt_override_reaches_model():
    seen = []

    class Spy(ConstantModel):
        def forward(self, images, prompts):
            seen.extend(prompts)
            return super().forward(images, prompts)

    evaluate(Spy(1.0), white_on_black(2), prompts=["x", "y"])
    assert seen == ["x", "y"]


def test_report_io_roundtrip(tmp_path):
    reps = [evaluate(OracleModel(), white_on_black(), model_name=m, ptype="P1") for m in ("a", "b")]
    csv_path = write_reports_csv(reps, tmp_path / "r.csv")
    rows = read_reports_csv(csv_path)
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert rows[1]["model"] == "b" and rows[1]["dice_mean"] == 100.0
    back = read_reports_json(write_reports_json(reps, tmp_path / "r.json"))
    assert back == reps


def test_prompt_type_charts(tmp_path):
    reps = [evaluate(OracleModel(s), white_on_black(), model_name=f"m{s}", ptype=p)
            for s in (1.0, -1.0) for p in ("P0", "P1")]
    paths = prompt_type_charts(reps, tmp_path)
    assert [p.name for p in paths] == ["toy_prompt_types.png"]
    assert paths[0].stat().st_size > 0


# ------------------------------------------------------------------ cross-eval


@pytest.fixture(scope="module")
def two_handles(tmp_path_factory):
    root = tmp_path_factory.mktemp("cross")
    write_blob_dataset(root / "kvasir_seg", counts=(1, 1, 2), seed=1)
    write_blob_dataset(root / "etis", counts=(0, 0, 2), seed=2)
    return [register_dataset(get_descriptor(n), root / n) for n in ("kvasir_seg", "etis")]


def test_evaluate_split(two_handles):
    rep = evaluate_split(build_variant(toy_config()), two_handles[1], "test", "P0", model_name="clipseg")
    assert rep.test_data == "etis" and rep.ptype == "P0" and rep.n == 2
    with pytest.raises(ValueError, match="empty"):
        evaluate_split(build_variant(toy_config()), two_handles[1], "train")


def test_cross_dataset_eval_from_paths_and_modules(two_handles, tmp_path):
    path = save_checkpoint(build_variant(toy_config(seed=1)), tmp_path / "k.pt")
    matrix = cross_dataset_eval({"kvasir_seg": path, "clinicdb": build_variant(toy_config(seed=2))}, two_handles)
    assert len(matrix.reports()) == 4
    assert matrix.in_distribution_cells() == [("kvasir_seg", "kvasir_seg")]
    table = matrix.table()
    assert table[0] == ["train \\ test", "kvasir_seg", "etis"]
    del matrix.cells[("clinicdb", "etis")]
    assert matrix.table()[2][2] == "-"


def test_cross_dataset_eval_guards(two_handles, tmp_path):
    with pytest.raises(FileNotFoundError, match=r"missing checkpoint .* for cell \(bkai, kvasir_seg\)"):
        cross_dataset_eval({"bkai": tmp_path / "nope.pt"}, two_handles)
    busi_root = write_blob_dataset(tmp_path / "busi", counts=(1, 1, 1))
    with pytest.warns(UserWarning):
        busi = register_dataset(get_descriptor("busi"), busi_root)
    with pytest.raises(ValueError, match="mix prompt families"):
        cross_dataset_eval({"kvasir_seg": build_variant(toy_config())}, [two_handles[0], busi])
