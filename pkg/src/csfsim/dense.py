"""Dense float32 reference semantics for CONV and FC layers.

These oracles and the streaming engine must agree bit for bit, so the
accumulation discipline is pinned down: channels outermost, then kernel row,
then kernel column. CONV keeps one float32 partial sum per channel per
output element (the engine flushes its register file into the output buffer
once per channel); FC keeps a single flat running sum per output, walking
the input in stream order.
"""

from __future__ import annotations

import numpy as np

from .layers import LayerSpec, output_shape


def as_f32(values, dims=None) -> np.ndarray:
    """Coerce to a C-contiguous float32 array; rejects NaN/Inf values."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError("tensor contains NaN or Inf")
    if dims is not None and arr.shape != tuple(dims):
        raise ValueError(f"expected dims {tuple(dims)}, got {arr.shape}")
    return arr


def pad_channels(features: np.ndarray, pad: int) -> np.ndarray:
    """Zero border of `pad` elements on every side of each channel plane."""
    if pad == 0:
        return features
    return np.pad(features, ((0, 0), (pad, pad), (pad, pad)))


def _window_plane(padded: np.ndarray, chi: int, r: int, c: int,
                  out_h: int, out_w: int, stride: int) -> np.ndarray:
    """The out_h x out_w input samples that kernel position (r, c) touches."""
    return padded[chi,
                  r:r + (out_h - 1) * stride + 1:stride,
                  c:c + (out_w - 1) * stride + 1:stride]


def dense_conv(features, weights, layer: LayerSpec) -> np.ndarray:
    """Direct convolution over a filter bank of shape (filters, C, K, K).

    The bank's leading extent may be any batch size. Output is
    (filters, out_h, out_w) float32, accumulated channel-major with one
    partial sum per channel.
    """
    if layer.kind != "conv":
        raise ValueError(f"{layer.name}: dense_conv needs a conv layer")
    x = as_f32(features, (layer.channels, layer.height, layer.width))
    w = as_f32(weights)
    if w.ndim != 4 or w.shape[1:] != (layer.channels, layer.kernel, layer.kernel):
        raise ValueError(
            f"{layer.name}: weights {w.shape} do not match "
            f"(*, {layer.channels}, {layer.kernel}, {layer.kernel})"
        )
    out_w, out_h = output_shape(layer)
    padded = pad_channels(x, layer.pad)
    out = np.zeros((w.shape[0], out_h, out_w), np.float32)
    for chi in range(layer.channels):
        partial = np.zeros_like(out)
        for r in range(layer.kernel):
            for c in range(layer.kernel):
                plane = _window_plane(padded, chi, r, c, out_h, out_w, layer.stride)
                partial += w[:, chi, r, c][:, None, None] * plane[None, :, :]
        out += partial
    return out


def dense_fc(features, weights, layer: LayerSpec) -> np.ndarray:
    """Full dot product per filter, accumulated in input stream order.

    Weights have shape (filters, C, H, W); output is (filters, 1, 1).
    """
    if layer.kind != "fc":
        raise ValueError(f"{layer.name}: dense_fc needs an fc layer")
    x = as_f32(features, (layer.channels, layer.height, layer.width)).ravel()
    w = as_f32(weights)
    if w.ndim != 4 or w.shape[1:] != (layer.channels, layer.height, layer.width):
        raise ValueError(
            f"{layer.name}: weights {w.shape} do not match "
            f"(*, {layer.channels}, {layer.height}, {layer.width})"
        )
    flat = w.reshape(w.shape[0], -1)
    out = np.zeros(w.shape[0], np.float32)
    for p in range(x.size):
        out += flat[:, p] * x[p]
    return out.reshape(w.shape[0], 1, 1)


def random_sparse_filters(layer: LayerSpec, density: float, seed: int) -> np.ndarray:
    """Deterministic sparse filter bank for a layer.

    Draws from numpy's default PCG64 stream seeded with `seed`: a keep mask
    with nonzero probability `density`, then magnitudes uniform in (0, 1]
    (never exactly zero), then a random sign, in that order. The same seed
    always yields the same bank.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density {density} outside [0, 1]")
    if layer.kind == "conv":
        shape = (layer.filters, layer.channels, layer.kernel, layer.kernel)
    else:
        shape = (layer.filters, layer.channels, layer.height, layer.width)
    rng = np.random.default_rng(seed)
    keep = rng.random(shape) < density
    magnitude = 1.0 - rng.random(shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return (keep * sign * magnitude).astype(np.float32)
