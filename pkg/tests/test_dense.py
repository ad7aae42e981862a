"""Dense oracles against independently coded brute-force references."""

import numpy as np
import pytest

from csfsim import (LayerSpec, as_f32, dense_conv, dense_fc, output_shape,
                    random_sparse_filters)


def _brute_conv(x, w, layer):
    """Scalar quadruple-loop reference, float32 at every step.

    Kept deliberately independent of the library: shapes and padding are
    recomputed here, and accumulation runs one scalar at a time with a
    per-channel partial sum.
    """
    c_n, h, wd = x.shape
    m, _, k, _ = w.shape
    p, s = layer.pad, layer.stride
    padded = np.zeros((c_n, h + 2 * p, wd + 2 * p), np.float32)
    padded[:, p:p + h, p:p + wd] = x
    out_h = (h + 2 * p - k) // s + 1
    out_w = (wd + 2 * p - k) // s + 1
    out = np.zeros((m, out_h, out_w), np.float32)
    for j in range(m):
        for y in range(out_h):
            for xo in range(out_w):
                acc = np.float32(0.0)
                for chi in range(c_n):
                    part = np.float32(0.0)
                    for r in range(k):
                        for c in range(k):
                            term = np.float32(w[j, chi, r, c]
                                              * padded[chi, y * s + r, xo * s + c])
                            part = np.float32(part + term)
                    acc = np.float32(acc + part)
                out[j, y, xo] = acc
    return out


def _brute_fc(x, w):
    """Scalar mat-vec with one flat running float32 sum per output."""
    flat_x = x.ravel()
    flat_w = w.reshape(w.shape[0], -1)
    out = np.zeros((w.shape[0], 1, 1), np.float32)
    for j in range(w.shape[0]):
        acc = np.float32(0.0)
        for p in range(flat_x.size):
            acc = np.float32(acc + np.float32(flat_w[j, p] * flat_x[p]))
        out[j, 0, 0] = acc
    return out


def _rand_input(shape, seed):
    rng = np.random.default_rng(seed)
    return (rng.random(shape) * 2.0 - 1.0).astype(np.float32)


class TestAsF32:
    def test_coerces_lists(self):
        arr = as_f32([[1, 2], [3, 4]])
        assert arr.dtype == np.float32 and arr.flags.c_contiguous

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN or Inf"):
            as_f32([1.0, float("nan")])

    def test_rejects_wrong_dims(self):
        with pytest.raises(ValueError, match="dims"):
            as_f32(np.zeros((2, 3)), dims=(3, 2))


class TestDenseConv:
    def test_zero_weights_zero_output(self):
        layer = LayerSpec("z", "conv", 2, 5, 5, 3, 1, 0, 4)
        out = dense_conv(_rand_input((2, 5, 5), 0), np.zeros((4, 2, 3, 3)), layer)
        assert out.shape == (4, 3, 3)
        assert not out.any()

    def test_identity_kernel_copies_plane(self):
        layer = LayerSpec("i", "conv", 1, 6, 6, 1, 1, 0, 3)
        x = _rand_input((1, 6, 6), 1)
        w = np.ones((3, 1, 1, 1), np.float32)
        out = dense_conv(x, w, layer)
        for j in range(3):
            assert np.array_equal(out[j], x[0])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force_bitwise(self, seed):
        layer = LayerSpec("r", "conv", 4, 8, 8, 3, 1, 0, 8)
        bank = random_sparse_filters(layer, 0.7, seed)
        x = _rand_input((4, 8, 8), seed + 100)
        assert np.array_equal(dense_conv(x, bank, layer),
                              _brute_conv(x, bank, layer))

    @pytest.mark.parametrize("stride,pad", [(2, 0), (1, 1), (2, 2)])
    def test_matches_brute_force_strided_padded(self, stride, pad):
        layer = LayerSpec("sp", "conv", 3, 9, 7, 3, stride, pad, 5)
        bank = random_sparse_filters(layer, 1.0, 42)
        x = _rand_input((3, 9, 7), 43)
        assert np.array_equal(dense_conv(x, bank, layer),
                              _brute_conv(x, bank, layer))

    def test_linear_in_input(self):
        layer = LayerSpec("l", "conv", 2, 6, 6, 3, 1, 1, 4)
        bank = random_sparse_filters(layer, 1.0, 7)
        x = _rand_input((2, 6, 6), 8)
        # float32 sums do not commute with scaling exactly, so allow
        # slack where terms nearly cancel
        lhs = dense_conv(3.0 * x, bank, layer)
        rhs = 3.0 * dense_conv(x, bank, layer)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-4, atol=1e-5)

    def test_weight_shape_mismatch(self):
        layer = LayerSpec("m", "conv", 2, 6, 6, 3, 1, 0, 4)
        with pytest.raises(ValueError, match="weights"):
            dense_conv(np.zeros((2, 6, 6)), np.zeros((4, 2, 5, 5)), layer)

    def test_input_shape_mismatch(self):
        layer = LayerSpec("m", "conv", 2, 6, 6, 3, 1, 0, 4)
        with pytest.raises(ValueError, match="dims"):
            dense_conv(np.zeros((3, 6, 6)), np.zeros((4, 2, 3, 3)), layer)


class TestDenseFc:
    def test_identity_weights_permute_input(self):
        layer = LayerSpec("p", "fc", 2, 2, 2, 1, 1, 0, 8)
        x = _rand_input((2, 2, 2), 3)
        w = np.zeros((8, 2, 2, 2), np.float32)
        order = [5, 0, 3, 7, 2, 1, 6, 4]
        for j, src in enumerate(order):
            w.reshape(8, 8)[j, src] = 1.0
        out = dense_fc(x, w, layer)
        assert np.array_equal(out.ravel(), x.ravel()[order])

    def test_zero_input_zero_output(self):
        layer = LayerSpec("z", "fc", 2, 3, 3, 1, 1, 0, 5)
        bank = random_sparse_filters(layer, 1.0, 9)
        assert not dense_fc(np.zeros((2, 3, 3)), bank, layer).any()

    def test_matches_brute_force_bitwise(self):
        layer = LayerSpec("r", "fc", 2, 4, 4, 1, 1, 0, 16)
        bank = random_sparse_filters(layer, 0.8, 10)
        x = _rand_input((2, 4, 4), 11)
        assert np.array_equal(dense_fc(x, bank, layer), _brute_fc(x, bank))

    def test_kind_guard(self):
        layer = LayerSpec("c", "conv", 2, 4, 4, 3, 1, 0, 4)
        with pytest.raises(ValueError, match="fc"):
            dense_fc(np.zeros((2, 4, 4)), np.zeros((4, 2, 4, 4)), layer)


class TestRandomSparseFilters:
    def test_density_zero_all_zero(self):
        layer = LayerSpec("d0", "conv", 4, 8, 8, 3, 1, 0, 8)
        assert not random_sparse_filters(layer, 0.0, 1).any()

    def test_density_one_no_zeros(self):
        layer = LayerSpec("d1", "conv", 4, 8, 8, 3, 1, 0, 8)
        assert (random_sparse_filters(layer, 1.0, 1) != 0).all()

    def test_density_statistics(self):
        # 128 * 16 * 9 = 18432 weights, enough for a +-0.05 window
        layer = LayerSpec("st", "conv", 16, 8, 8, 3, 1, 0, 128)
        bank = random_sparse_filters(layer, 0.3, 5)
        observed = np.count_nonzero(bank) / bank.size
        assert abs(observed - 0.3) < 0.05

    def test_seed_determinism(self):
        layer = LayerSpec("s", "conv", 3, 6, 6, 3, 1, 0, 5)
        a = random_sparse_filters(layer, 0.4, 77)
        b = random_sparse_filters(layer, 0.4, 77)
        assert np.array_equal(a, b)
        c = random_sparse_filters(layer, 0.4, 78)
        assert not np.array_equal(a, c)

    def test_values_bounded(self):
        layer = LayerSpec("b", "conv", 3, 6, 6, 3, 1, 0, 5)
        bank = random_sparse_filters(layer, 1.0, 2)
        assert (np.abs(bank) <= 1.0).all()
        assert (np.abs(bank) > 0.0).all()

    def test_fc_bank_shape(self):
        layer = LayerSpec("f", "fc", 3, 4, 5, 1, 1, 0, 6)
        assert random_sparse_filters(layer, 0.5, 0).shape == (6, 3, 4, 5)

    def test_density_out_of_range(self):
        layer = LayerSpec("e", "conv", 1, 4, 4, 3, 1, 0, 1)
        with pytest.raises(ValueError, match="density"):
            random_sparse_filters(layer, 1.5, 0)
