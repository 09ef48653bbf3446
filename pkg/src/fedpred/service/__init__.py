"""HTTP service wrapping the fedpred core (FastAPI + pydantic schemas)."""

from .app import create_app

__all__ = ["create_app"]
