"""Publication-style figures from designspace JSON/CSV artifact bundles."""

from .manifest import Manifest, SchemaError
from .render import RENDERERS, render

__version__ = "0.1.0"

__all__ = ["Manifest", "RENDERERS", "SchemaError", "render"]
