"""armada: knowledge-guided augmentation for image-text pair datasets.

The pipeline extracts (entity, attribute, value) triples from captions,
substitutes values under a hierarchical entity-attribute knowledge base
(falling back to an LLM for attributes the KB lacks), sends edit
instructions to an image-editing backend, and keeps the augmented pairs
whose Fréchet feature distance to the original sits inside a similarity
band.
"""

from .backends import ImageRef
from .errors import ArmadaError
from .extraction import ExtractedTriple
from .kb import KnowledgeBase, build_kb, link_entity
from .pipeline import ImageTextPair, run_augment
from .selection import frechet_distance, gaussian_stats, select_candidates
from .substitution import Strategy, SubstitutionPlan

__version__ = "0.1.0"

__all__ = [
    "ArmadaError",
    "ExtractedTriple",
    "ImageRef",
    "ImageTextPair",
    "KnowledgeBase",
    "Strategy",
    "SubstitutionPlan",
    "__version__",
    "build_kb",
    "frechet_distance",
    "gaussian_stats",
    "link_entity",
    "run_augment",
    "select_candidates",
]
