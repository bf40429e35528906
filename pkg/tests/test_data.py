import numpy as np
import pytest
import torch
from PIL import Image

from vlseg.data import (
    CLIPSEG_INPUT,
    DATASETS,
    ENDOSCOPY,
    InputSpec,
    SampleTriplet,
    expand_multiclass,
    get_descriptor,
    pool,
    preprocess,
    register_dataset,
    resize_mask,
    restore,
)
from vlseg.data.registry import ENDOSCOPY_TRAINABLE, NON_RADIOLOGY_TRAINABLE, RADIOLOGY
from vlseg.data.synthetic import QUADRANTS, blob_samples, quadrant_samples, write_blob_dataset, write_dataset
from vlseg.prompts import PromptType, generate_prompt_records, index_records, load_attribute_sidecar


def test_registry_has_eleven_datasets():
    assert len(DATASETS) == 11
    assert len(ENDOSCOPY) == 6
    assert ENDOSCOPY_TRAINABLE == ("kvasir_seg", "clinicdb", "bkai")
    assert set(RADIOLOGY) == {"camus", "busi", "chexlocalize"}
    assert len(NON_RADIOLOGY_TRAINABLE) == 5
    assert get_descriptor("Kvasir-SEG").name == "kvasir_seg"
    assert get_descriptor("camus").is_multiclass
    with pytest.raises(KeyError, match="unknown dataset"):
        get_descriptor("mnist")


def test_triplet_shape_validation():
    with pytest.raises(ValueError, match="H x W x 3"):
        SampleTriplet("s", np.zeros((4, 4)), np.zeros((4, 4)), "", "c", "d")
    with pytest.raises(ValueError, match="does not match"):
        SampleTriplet("s", np.zeros((4, 4, 3)), np.zeros((5, 4)), "", "c", "d")


def test_expand_multiclass_one_triplet_per_class():
    image = np.zeros((6, 6, 3), np.uint8)
    mask = np.zeros((6, 6), np.uint8)
    mask[:2] = 1
    mask[4:] = 3
    table = {"a": 1, "b": 2, "c": 3}
    out = expand_multiclass(image, mask, table, {"a": "pa"}, "s", "d")
    assert [t.class_name for t in out] == ["a", "b", "c"]
    assert out[0].prompt == "pa" and out[1].prompt == ""
    assert out[1].mask.sum() == 0
    assert out[2].mask.sum() == 12
    assert len(expand_multiclass(image, mask, table, include_absent=False)) == 2


def test_preprocess_and_restore():
    image = np.full((10, 20, 3), 255, np.uint8)
    spec = InputSpec(8, (0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
    x = preprocess(image, spec)
    assert x.shape == (3, 8, 8)
    assert torch.allclose(x, torch.ones_like(x))
    assert restore(torch.zeros(2, 1, 8, 8), (10, 20)).shape == (2, 1, 10, 20)
    with pytest.raises(ValueError):
        preprocess(np.zeros((4, 4)), CLIPSEG_INPUT)


def test_resize_mask_stays_binary():
    mask = np.zeros((7, 9), np.uint8)
    mask[2:5, 3:6] = 1
    out = resize_mask(mask, 16)
    assert out.shape == (1, 16, 16)
    assert set(out.unique().tolist()) <= {0.0, 1.0}


def test_blob_and_quadrant_generators():
    blobs = blob_samples(3, seed=1)
    assert len(blobs) == 3 and all(b.mask.any() for b in blobs)
    assert all(b.prompt.startswith(("one", "two")) for b in blobs)
    quads = quadrant_samples(2, seed=0)
    assert len(quads) == 8
    for t, name in zip(quads, QUADRANTS * 2):
        assert t.prompt.endswith(f"located in the {name} of the image")
    # every quadrant triplet of one image shares the image
    assert all(np.array_equal(quads[0].image, q.image) for q in quads[:4])


def test_register_dataset_roundtrip(tmp_path):
    root = write_blob_dataset(tmp_path / "kvasir", counts=(3, 1, 2))
    with pytest.warns(UserWarning, match="split counts"):
        handle = register_dataset(get_descriptor("kvasir_seg"), root)
    assert handle.split_sizes() == {"train": 3, "val": 1, "test": 2}
    with pytest.raises(ValueError, match="split counts"):
        register_dataset(get_descriptor("kvasir_seg"), root, strict_counts=True)
    sidecar = load_attribute_sidecar(handle.sidecar_path())
    records = index_records(
        generate_prompt_records(handle.family, handle.class_table, handle.iter_masks("train"), sidecar, ["P3"])
    )
    triplets = handle.triplets("train", records, "P3")
    assert len(triplets) == 3
    assert triplets[0].prompt == "pink round polyp"
    assert triplets[0].mask.dtype == np.uint8 and triplets[0].mask.max() == 1
    with pytest.raises(KeyError, match="no P4 prompt"):
        handle.triplets("train", records, "P4")
    assert all(t.prompt == "" for t in handle.triplets("test"))


def test_binary_masks_saved_as_255(tmp_path):
    image = np.zeros((4, 4, 3), np.uint8)
    mask = np.zeros((4, 4), np.uint8)
    mask[0, 0] = 255
    write_dataset(tmp_path, {"test": [("s", image, mask)]}, {"polyp": 1})
    handle = register_dataset(get_descriptor("etis"), tmp_path)
    assert handle.load_mask("test", "s").max() == 1


def test_manifest_and_class_stack(tmp_path):
    image = np.zeros((4, 4, 3), np.uint8)
    stack = np.zeros((3, 4, 4), np.uint8)
    stack[1, :2, :2] = 1
    table = {"Myocardium": 1, "Left ventricular cavity": 2, "Left atrium cavity": 3}
    write_dataset(tmp_path, {"test": [("a", image, stack), ("b", image, stack)]}, table)
    (tmp_path / "test.txt").write_text("b\n")
    handle = register_dataset(get_descriptor("camus"), tmp_path)
    assert handle.ids("test") == ["b"]
    triplets = handle.triplets("test")
    assert [t.mask.sum() for t in triplets] == [0, 4, 0]


def test_register_rejects_bad_layouts(tmp_path):
    root = write_blob_dataset(tmp_path / "etis", counts=(1, 0, 1))
    with pytest.raises(ValueError, match="test-only"):
        register_dataset(get_descriptor("etis"), root)
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError, match="no samples"):
        register_dataset(get_descriptor("kvasir_seg"), tmp_path / "empty")
    root = write_blob_dataset(tmp_path / "dup", counts=(1, 0, 1))
    Image.open(root / "images/train/train_blob000.png").save(root / "images/test/train_blob000.png")
    Image.open(root / "masks/train/train_blob000.png").save(root / "masks/test/train_blob000.png")
    with pytest.raises(ValueError, match="in both"):
        register_dataset(get_descriptor("kvasir_seg"), root)
    root = write_blob_dataset(tmp_path / "nomask", counts=(1, 0, 1))
    (root / "masks/test/test_blob000.png").unlink()
    with pytest.raises(FileNotFoundError, match="missing mask"):
        register_dataset(get_descriptor("kvasir_seg"), root)


def _handle(tmp_path, name, counts):
    with pytest.warns(UserWarning):
        return register_dataset(get_descriptor(name), write_blob_dataset(tmp_path / name, counts=counts))


def test_pool_concatenates_and_guards(tmp_path):
    a = _handle(tmp_path, "kvasir_seg", (2, 1, 1))
    b = _handle(tmp_path, "clinicdb", (3, 1, 1))
    pooled = pool([a, b], "endoscopy", seed=4)
    assert pooled.split_sizes() == {"train": 5, "val": 2, "test": 2}
    assert pooled.order("train")[0] == ("kvasir_seg", "train_blob000")
    assert pooled.order("train", 1) == pooled.order("train", 1)
    assert sorted(pooled.order("train", 2)) == sorted(pooled.order("train"))
    etis = _handle(tmp_path, "etis", (0, 0, 1))
    with pytest.raises(ValueError, match="test-only"):
        pool([a, etis])
    dfu = _handle(tmp_path, "dfu", (1, 1, 1))
    with pytest.raises(ValueError, match="not an endoscopy"):
        pool([a, dfu], "endoscopy")
    assert pool([a, dfu]).kind == "all"
    with pytest.raises(ValueError):
        pool([])
    with pytest.raises(ValueError):
        pool([a], "radiology")


def test_p0_triplets_without_records(tmp_path):
    handle = _handle(tmp_path, "bkai", (1, 1, 1))
    assert handle.triplets("val", None, PromptType.P0)[0].prompt == ""
