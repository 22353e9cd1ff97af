"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

ARCHS = ("resnet18", "vit_b_16")

# (map_h, map_w, dim) token grids at the default 224x224 input
DEFAULT_GRIDS = {
    "resnet18": (7, 7, 512),
    "vit_b_16": (14, 14, 768),
}


@dataclass(frozen=True)
class ServiceConfig:
    """Which model to wrap and how to expose it.

    The declared (map_h, map_w, feature_dim) must match the wrapped model's
    actual token grid; the wrapper probes one forward pass at startup and
    refuses to serve on a mismatch.
    """

    arch: str = "resnet18"
    checkpoint: str | None = None  # state-dict file; random seeded init when absent
    seed: int = 0
    device: str = "cpu"
    input_size: int = 224
    map_h: int | None = None
    map_w: int | None = None
    feature_dim: int | None = None
    host: str = "127.0.0.1"
    port: int = 9000
    name: str | None = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}; choose from {ARCHS}")
        h, w, d = DEFAULT_GRIDS[self.arch]
        if self.map_h is None:
            object.__setattr__(self, "map_h", h)
        if self.map_w is None:
            object.__setattr__(self, "map_w", w)
        if self.feature_dim is None:
            object.__setattr__(self, "feature_dim", d)
        if self.name is None:
            object.__setattr__(self, "name", f"encoder-service/{self.arch}")
