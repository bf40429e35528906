"""Attribute extraction and prompt composition."""
from .attributes import AttributeKey, AttributeSet, PromptType, Provenance, parse_key
from .banks import GENERAL_DESCRIPTIONS
from .generate import (
    PromptRecord,
    build_record,
    class_attributes,
    generate_prompt_records,
    index_records,
    literal_records,
    load_free_text_prompts,
    per_class_masks,
    read_jsonl,
    sample_rng,
    write_jsonl,
)
from .masks import (
    ExtractionConfig,
    MaskDerivedAttributes,
    count_components,
    extract_mask_attributes,
    label_components,
)
from .sidecar import SidecarEntry, load_attribute_sidecar, merge_with_sidecar, parse_sidecar
from .templates import (
    FAMILIES,
    MissingAttributeError,
    PromptUnavailableError,
    available_prompt_types,
    compose_all,
    compose_prompt,
    get_family,
)

__all__ = [name for name in dir() if not name.startswith("_")]
