"""Spatial-map extraction from torchvision backbones.

Both adapters return a position grid: the ResNet wrapper reads the last
convolutional stage directly, the ViT wrapper reshapes the patch tokens back
into their grid after dropping the class token (global tokens have no
spatial position and stay out of the map).
"""

from __future__ import annotations

import threading

import numpy as np
import torch
import torchvision

from .config import ServiceConfig


class ShapeViolation(ValueError):
    """Input violates the shape contract (HTTP 422)."""


class SpatialEncoder:
    """Deterministic inference wrapper producing (H, W, D) feature maps."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.device = torch.device(config.device)
        torch.manual_seed(config.seed)
        if config.arch == "resnet18":
            self._model = torchvision.models.resnet18(weights=None)
        else:
            self._model = torchvision.models.vit_b_16(weights=None)
        if config.checkpoint:
            state = torch.load(config.checkpoint, map_location=self.device, weights_only=True)
            self._model.load_state_dict(state)
        self._model.to(self.device)
        self._model.eval()
        self._lock = threading.Lock()  # serialize model access across requests
        self._verify_grid()

    def _verify_grid(self) -> None:
        probe = torch.zeros(1, 3, self.config.input_size, self.config.input_size)
        got = tuple(self._forward_grid(probe.to(self.device)).shape[1:])
        declared = (self.config.map_h, self.config.map_w, self.config.feature_dim)
        if got != declared:
            raise ValueError(
                f"declared map shape {declared} does not match the model's "
                f"actual token grid {got}"
            )

    def _forward_grid(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, S, S) -> (B, H, W, D) without the classifier head."""
        with torch.no_grad():
            if self.config.arch == "resnet18":
                m = self._model
                f = m.maxpool(m.relu(m.bn1(m.conv1(x))))
                f = m.layer4(m.layer3(m.layer2(m.layer1(f))))
                return f.permute(0, 2, 3, 1).contiguous()
            v = self._model
            tokens = v._process_input(x)
            cls = v.class_token.expand(tokens.shape[0], -1, -1)
            encoded = v.encoder(torch.cat([cls, tokens], dim=1))
            patch_tokens = encoded[:, 1:]  # class token excluded from the map
            side = self.config.input_size // v.patch_size
            return patch_tokens.reshape(x.shape[0], side, side, -1).contiguous()

    def _prepare(self, images: np.ndarray) -> torch.Tensor:
        """(B, h, w, c) float32 in [0, 1] -> model-sized (B, 3, S, S)."""
        b, h, w, c = images.shape
        if h < 1 or w < 1:
            raise ShapeViolation(f"image dimensions must be >= 1, got {h}x{w}")
        if c == 1:
            images = np.repeat(images, 3, axis=3)
        elif c != 3:
            raise ShapeViolation(f"images must have 1 or 3 channels, got {c}")
        x = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
        x = x.permute(0, 3, 1, 2)
        size = self.config.input_size
        if (h, w) != (size, size):
            x = torch.nn.functional.interpolate(x, size=(size, size), mode="bilinear",
                                                align_corners=False)
        return x.to(self.device)

    def encode_map(self, image: np.ndarray) -> np.ndarray:
        """(h, w, c) -> (H, W, D) float32."""
        with self._lock:
            grid = self._forward_grid(self._prepare(image[None]))
        return grid[0].cpu().numpy().astype(np.float32)

    def encode_patch_batch(self, patches: np.ndarray) -> np.ndarray:
        """(n, h, w, c) -> (n, D) float32 via spatial average pooling."""
        if patches.shape[0] == 0:
            return np.zeros((0, self.config.feature_dim), dtype=np.float32)
        with self._lock:
            grid = self._forward_grid(self._prepare(patches))
        pooled = grid.reshape(grid.shape[0], -1, grid.shape[3]).mean(dim=1)
        return pooled.cpu().numpy().astype(np.float32)
