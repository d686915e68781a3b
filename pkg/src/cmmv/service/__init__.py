"""FastAPI wrapper around the calibration/pricing toolkit."""

from .app import create_app

__all__ = ["create_app"]
