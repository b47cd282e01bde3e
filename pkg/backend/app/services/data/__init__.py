"""
__Project__: SRL-VAE Lab
__Description__: Data Package that provides deterministic ingestion, splitting and batching of image corpora.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.data.batching import iterate_epochs, make_batches
from app.services.data.loader import (
    DatasetSplits,
    ImageCorpusLoader,
    assign_splits,
    load_dataset,
    split_fingerprint,
)
from app.services.data.synthetic import write_synthetic_corpus


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'DatasetSplits',
    'ImageCorpusLoader',
    'assign_splits',
    'iterate_epochs',
    'load_dataset',
    'make_batches',
    'split_fingerprint',
    'write_synthetic_corpus',
]
