"""HTTP service: annotation sessions plus processing endpoints."""

from .app import create_app

__all__ = ["create_app"]
