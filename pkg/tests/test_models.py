import json

import pytest
import torch

from vlseg.models import (
    BASELINES,
    SENTENCE_LEVEL,
    TOKEN_LEVEL,
    VARIANTS,
    CheckpointProvider,
    CNNConfig,
    HashTokenizer,
    ToyProvider,
    VLSMConfig,
    build_baseline,
    build_variant,
    export_components,
    load_model,
    parameter_vector,
    reference_config,
    register_baseline,
    save_checkpoint,
    tiny_config,
    toy_config,
    trainable_parameters,
)


def test_tokenizer_wraps_and_truncates():
    tok = HashTokenizer(64, 6)
    assert tok.encode("") == [tok.BOS, tok.EOS]
    assert tok.words("Two-chamber view, of") == ["two-chamber", "view", ",", "of"]
    with pytest.warns(UserWarning, match="truncated"):
        ids = tok.encode("a b c d e f g")
    assert len(ids) == 6 and ids[-1] == tok.EOS
    ids, mask = tok.batch(["a", "a b c"])
    assert ids.shape == (2, 5)
    assert mask.sum(1).tolist() == [3, 5]
    with pytest.raises(ValueError):
        HashTokenizer(3)


@pytest.mark.parametrize("variant", VARIANTS)
def test_variant_output_shape_and_conditioning(variant):
    model = build_variant(toy_config(variant))
    expected = TOKEN_LEVEL if variant == "cris" else SENTENCE_LEVEL
    assert model.config.conditioning == expected
    x = torch.randn(2, 3, 64, 64)
    out = model(x, ["one small polyp", ""])
    assert out.shape == (2, 1, 16, 16)
    assert torch.isfinite(out).all()


def test_prompt_changes_output():
    for variant in ("clipseg", "cris"):
        model = build_variant(toy_config(variant, seed=1))
        x = torch.randn(1, 3, 64, 64)
        assert not torch.allclose(model(x, "polyp"), model(x, "one large pink round polyp"))


def test_config_validation():
    with pytest.raises(ValueError, match="unknown variant"):
        VLSMConfig(variant="lseg")
    with pytest.raises(ValueError, match="requires"):
        VLSMConfig(variant="cris", conditioning=SENTENCE_LEVEL)
    with pytest.raises(ValueError, match="patch"):
        VLSMConfig(input_side=60, patch=8)
    assert reference_config("clipseg").input_side == 352
    assert reference_config("cris").input_side == 416
    assert VLSMConfig.from_dict(toy_config("cris").to_dict()) == toy_config("cris")


def test_forward_validates_inputs():
    model = build_variant(toy_config())
    with pytest.raises(ValueError, match="prompts"):
        model(torch.randn(2, 3, 64, 64), ["a"])
    with pytest.raises(ValueError, match="64px"):
        model(torch.randn(1, 3, 32, 32), "a")


def test_tiny_config_under_1k_parameters():
    for variant in ("clipseg", "cris"):
        model = build_variant(tiny_config(variant))
        assert sum(p.numel() for p in model.parameters()) <= 1000
        assert model(torch.randn(1, 3, 8, 8), "x").shape == (1, 1, 2, 2)


def test_toy_provider_is_deterministic():
    a = build_variant(toy_config(seed=3))
    b = build_variant(toy_config(seed=3))
    c = build_variant(toy_config(seed=4))
    assert torch.equal(parameter_vector(a), parameter_vector(b))
    assert not torch.equal(parameter_vector(a), parameter_vector(c))


def test_shared_backbone_components_match():
    clipseg = build_variant(toy_config("clipseg"))
    cris = build_variant(toy_config("cris"))
    assert torch.equal(parameter_vector(clipseg.text_encoder), parameter_vector(cris.text_encoder))
    assert torch.equal(parameter_vector(clipseg.vision_encoder), parameter_vector(cris.vision_encoder))


def test_biomedclipseg_decoders():
    d = build_variant(toy_config("biomedclipseg_d"))
    clipseg = build_variant(toy_config("clipseg"))
    rand = build_variant(toy_config("biomedclipseg"))
    assert torch.equal(parameter_vector(d.component("decoder")), parameter_vector(clipseg.component("decoder")))
    assert not torch.equal(parameter_vector(rand.component("decoder")), parameter_vector(d.component("decoder")))


def test_freeze_flags():
    model = build_variant(toy_config(freeze_text=True, freeze_vision=True))
    assert model.frozen_components() == ["text_encoder", "vision_encoder"]
    assert all(not p.requires_grad for p in model.text_encoder.parameters())
    assert all(p.requires_grad for p in model.component("decoder").parameters())
    n_trainable = sum(p.numel() for p in trainable_parameters(model))
    assert n_trainable == sum(p.numel() for p in model.component("decoder").parameters())


def test_checkpoint_provider_roundtrip(tmp_path):
    source = build_variant(toy_config("clipseg", seed=9))
    manifest = export_components(source, tmp_path)
    loaded = build_variant(toy_config("clipseg"), CheckpointProvider(manifest))
    assert torch.equal(parameter_vector(loaded), parameter_vector(source))
    # biomedclipseg_d needs the biomedclip backbone, which is not in the manifest
    with pytest.raises(KeyError, match="missing checkpoint"):
        build_variant(toy_config("biomedclipseg_d"), CheckpointProvider(manifest))


def test_checkpoint_provider_guards(tmp_path):
    manifest = export_components(build_variant(toy_config()), tmp_path)
    with pytest.raises(ValueError, match="dims"):
        build_variant(toy_config(vision_dim=16), CheckpointProvider(manifest))
    data = json.loads(manifest.read_text())
    data["components"]["clip/text_encoder"]["sha256"] = "0" * 64
    manifest.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="hash mismatch"):
        build_variant(toy_config(), CheckpointProvider(manifest))
    data["components"]["clip/text_encoder"]["file"] = "gone.pt"
    manifest.write_text(json.dumps(data))
    with pytest.raises(FileNotFoundError):
        build_variant(toy_config(), CheckpointProvider(manifest))
    manifest.write_text(json.dumps({"version": 2, "components": {}}))
    with pytest.raises(ValueError, match="version"):
        CheckpointProvider(manifest)


def test_save_and_load_model(tmp_path):
    model = build_variant(toy_config("cris", seed=2, freeze_text=True))
    path = save_checkpoint(model, tmp_path / "m.pt", epoch=3)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert torch.equal(parameter_vector(loaded), parameter_vector(model))
    assert not any(p.requires_grad for p in loaded.text_encoder.parameters())
    x = torch.randn(1, 3, 64, 64)
    model.eval()
    assert torch.equal(loaded(x, "a"), model(x, "a"))
    torch.save({"format": "other"}, tmp_path / "bad.pt")
    with pytest.raises(ValueError, match="not a"):
        load_model(tmp_path / "bad.pt")


def test_unet_ignores_prompt_and_roundtrips(tmp_path):
    model = build_baseline(CNNConfig(widths=(4, 8), input_side=16))
    x = torch.randn(2, 3, 16, 16)
    out = model(x, ["a", "b"])
    assert out.shape[0] == 2 and out.shape[1] == 1
    assert torch.equal(out, model(x, None))
    loaded = load_model(save_checkpoint(model, tmp_path / "u.pt"))
    loaded.eval()
    model.eval()
    assert torch.equal(loaded(x), model(x))
    with pytest.raises(ValueError):
        CNNConfig(widths=(4,))
    with pytest.raises(ValueError):
        CNNConfig(widths=(4, 8, 16), input_side=18)


def test_register_baseline():
    register_baseline("unet_alias", lambda cfg: build_baseline(CNNConfig(widths=cfg.widths)))
    try:
        assert build_baseline(CNNConfig(arch="unet_alias", widths=(4, 8))) is not None
    finally:
        BASELINES.pop("unet_alias")
    with pytest.raises(KeyError, match="unknown baseline"):
        build_baseline(CNNConfig(arch="segformer"))


def test_toy_provider_restores_global_rng():
    layer = torch.nn.Linear(3, 3)
    torch.manual_seed(0)
    expected = torch.rand(1)
    torch.manual_seed(0)
    ToyProvider(5).initialize(layer, "x")
    assert torch.equal(torch.rand(1), expected)
