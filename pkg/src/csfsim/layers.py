"""Layer shape records and dense arithmetic-count math."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LayerSpec:
    """Shape and hyperparameters of one CONV or FC layer.

    FC layers are modeled as unpadded stride-1 layers whose filters span the
    whole input volume; kernel, stride and pad are forced to 1, 1, 0 when
    kind is "fc".
    """

    name: str
    kind: str  # "conv" or "fc"
    channels: int
    height: int
    width: int
    kernel: int
    stride: int
    pad: int
    filters: int

    def __post_init__(self):
        if self.kind not in ("conv", "fc"):
            raise ValueError(f"{self.name}: unknown layer kind {self.kind!r}")
        if self.kind == "fc":
            object.__setattr__(self, "kernel", 1)
            object.__setattr__(self, "stride", 1)
            object.__setattr__(self, "pad", 0)
        for field in ("channels", "height", "width", "kernel", "stride", "filters"):
            if getattr(self, field) < 1:
                raise ValueError(f"{self.name}: {field} must be >= 1")
        if self.pad < 0:
            raise ValueError(f"{self.name}: pad must be >= 0")


def output_shape(layer: LayerSpec) -> tuple[int, int]:
    """Output plane extents (width, height), floor division on leftovers."""
    if layer.kind == "fc":
        return 1, 1
    padded_w = layer.width + 2 * layer.pad
    padded_h = layer.height + 2 * layer.pad
    if layer.kernel > padded_w or layer.kernel > padded_h:
        raise ValueError(
            f"{layer.name}: kernel {layer.kernel} exceeds padded input "
            f"{padded_h}x{padded_w}"
        )
    out_w = (padded_w - layer.kernel) // layer.stride + 1
    out_h = (padded_h - layer.kernel) // layer.stride + 1
    return out_w, out_h


def mac_count(layer: LayerSpec) -> int:
    """Dense multiply-accumulate count for one input frame.

    Python ints, so counts never overflow. Grouped-convolution variants are
    counted with their full channel fan-in.
    """
    if layer.kind == "fc":
        return layer.filters * layer.channels * layer.height * layer.width
    out_w, out_h = output_shape(layer)
    return layer.filters * layer.channels * layer.kernel ** 2 * out_w * out_h
