"""Dataset registry, triplets, pooling and input transforms."""
from .datasets import (
    DatasetHandle,
    PooledDataset,
    SampleTriplet,
    expand_multiclass,
    pool,
    register_dataset,
)
from .registry import DATASETS, ENDOSCOPY, SPLITS, DatasetDescriptor, get_descriptor
from .transforms import (
    BIOMEDCLIP_INPUT,
    CLIPSEG_INPUT,
    CRIS_INPUT,
    InputSpec,
    preprocess,
    resize_mask,
    restore,
)

__all__ = [name for name in dir() if not name.startswith("_")]
