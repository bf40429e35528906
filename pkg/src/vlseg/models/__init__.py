"""VLSM variants, image-only baselines, weight providers and checkpoints."""
from .checkpoint import load_model, save_checkpoint
from .encoders import HashTokenizer, TextEncoding, VisionFeatures
from .fusion import SENTENCE_LEVEL, TOKEN_LEVEL, FiLM, SentenceAggregator, TokenAggregator
from .providers import CheckpointProvider, ToyProvider, export_components
from .unet import BASELINES, CNNConfig, UNet, build_baseline, register_baseline
from .vlsm import (
    VARIANTS,
    VLSM,
    VLSMConfig,
    build_variant,
    parameter_vector,
    reference_config,
    tiny_config,
    toy_config,
    trainable_parameters,
)

__all__ = [name for name in dir() if not name.startswith("_")]
