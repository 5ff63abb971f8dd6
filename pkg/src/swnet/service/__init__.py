"""HTTP service exposing runs, search, and checkpoint-driven inference."""

from .app import create_app

__all__ = ["create_app"]
