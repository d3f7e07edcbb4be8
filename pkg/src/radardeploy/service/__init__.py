"""FastAPI service wrapping the toolkit for long-running, multi-client use."""

from .app import app, create_app

__all__ = ["app", "create_app"]
