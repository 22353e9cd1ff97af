"""encoder-service: torchvision backbones behind the encoder wire protocol."""

__version__ = "0.1.0"

from .app import EncoderService
from .config import ServiceConfig
from .model import SpatialEncoder
