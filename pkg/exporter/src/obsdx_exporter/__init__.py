"""obsdx-exporter: embedding precomputation and serving for the obsdx engine."""

from .encoders import EncoderLoadError, HashedEncoder, resolve_encoder
from .export import ExportError, export_images, export_text
from .service import serve
from .store_format import write_store_file

__version__ = "0.1.0"

__all__ = [
    "EncoderLoadError",
    "ExportError",
    "HashedEncoder",
    "export_images",
    "export_text",
    "resolve_encoder",
    "serve",
    "write_store_file",
]
