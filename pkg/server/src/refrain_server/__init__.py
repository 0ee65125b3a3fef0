"""Embedding and match-score service for the refrain retrieval engine."""

from .app import ServerConfig, create_app
from .encoder import LexicalHashEncoder, available_models, load_encoder

__version__ = "0.1.0"

__all__ = [
    "LexicalHashEncoder",
    "ServerConfig",
    "available_models",
    "create_app",
    "load_encoder",
]
