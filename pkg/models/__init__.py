from models.bundle import NETWORKS, ModelBundle
from models.discriminator import receptive_field
from models.embedder import TemporalPooling
from models.inference import discriminate, embed, extract, temporal_pooled_embed

__all__ = [
    "NETWORKS",
    "ModelBundle",
    "TemporalPooling",
    "discriminate",
    "embed",
    "extract",
    "receptive_field",
    "temporal_pooled_embed",
]
