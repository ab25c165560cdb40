import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dmsgcn.checks import LAYER_CHECKS, LAYER_TOL
from dmsgcn.errors import ConfigError, DimensionError
from dmsgcn.layers import (
    FusionUnit,
    SGCNLayer,
    STGCNBlock,
    TCNDecoder,
    TGCNLayer,
    fuse,
    sgcn_forward,
    stgcn_block,
    tcn_decode,
    tgcn_forward,
)
from dmsgcn.functional import make_rng
from dmsgcn.nn import Parameter
from dmsgcn.skeleton import SpatialGraph, build_mask, default_hierarchy, init_spatial_adjacency
from dmsgcn.tensor import Tensor

f64 = np.float64
JOINT = default_hierarchy().skeletons[0]


def sgcn_layer(rng, V, C_in, C_out, mask=None, dropout=0.0):
    mask = rng.integers(0, 2, size=(V, V)).astype(float) if mask is None else mask
    graph = SpatialGraph(Parameter(rng.normal(size=(V, V)), dtype=f64), mask)
    layer = SGCNLayer(graph, C_in, C_out, make_rng(0), dropout=dropout, dtype=f64)
    layer.T_s.data[...] = rng.normal(size=(V, V))
    layer.W_s.data[...] = rng.normal(size=(C_in, C_out))
    layer.slope.data[...] = rng.uniform(0.05, 0.5)
    return layer


def tgcn_layer(rng, T, C_in, C_out):
    layer = TGCNLayer(T, C_in, C_out, make_rng(0), dtype=f64)
    for p in (layer.graph.A_t, layer.T_t, layer.W_t):
        p.data[...] = rng.normal(size=p.shape)
    layer.slope.data[...] = rng.uniform(0.05, 0.5)
    return layer


def decoder(rng, T, K, n_layers=4, residual=False):
    dec = TCNDecoder(T, K, n_layers, make_rng(0), residual=residual, dtype=f64)
    for p in dec.parameters():
        p.data[...] = rng.normal(size=p.shape) * 0.5
    return dec


def decoder_layers(dec):
    return [(l.weight.data.tolist(), l.bias.data[:, 0].tolist(),
             None if l.slope is None else float(l.slope.data[0])) for l in dec.layers]


class TestSGCN:
    def test_identity_case(self, rng):
        V, C = 4, 3
        graph = SpatialGraph(Parameter(np.eye(V), dtype=f64), np.ones((V, V)))
        layer = SGCNLayer(graph, C, C, make_rng(0), dtype=f64)
        layer.W_s.data[...] = np.eye(C)
        layer.slope.data[...] = 1.0
        H = rng.normal(size=(2, V, C))
        np.testing.assert_array_equal(layer(Tensor(H, dtype=f64)).data, H)

    def test_scalar_loop_oracle(self, rng):
        layer = sgcn_layer(rng, 4, 3, 3)
        H = rng.normal(size=(2, 4, 3))
        want = oracles.sgcn(H.tolist(), layer.T_s.data.tolist(), layer.graph.A_s.data.tolist(),
                            layer.graph.mask.tolist(), layer.W_s.data.tolist(),
                            float(layer.slope.data[0]))
        assert np.max(np.abs(layer(Tensor(H, dtype=f64)).data - np.array(want))) <= 1e-10

    @given(st.integers(0, 10_000))
    def test_masked_joint_isolation(self, seed):
        rng = np.random.default_rng(seed)
        mask = build_mask(JOINT, 1)
        layer = sgcn_layer(rng, 22, 3, 4, mask=mask)
        layer.T_s.data[...] = np.eye(22)
        H = rng.normal(size=(2, 22, 3))
        i, j = map(int, np.argwhere(mask == 0)[rng.integers(int((mask == 0).sum()))])
        H2 = H.copy()
        H2[:, j] += rng.normal(size=(2, 3)) * 10
        a = layer(Tensor(H, dtype=f64)).data
        b = layer(Tensor(H2, dtype=f64)).data
        assert np.array_equal(a[:, i], b[:, i])
        assert not np.array_equal(a[:, j], b[:, j])

    def test_dropout_only_in_training(self, rng):
        layer = sgcn_layer(rng, 4, 3, 3, dropout=0.5)
        H = Tensor(rng.normal(size=(2, 4, 3)), dtype=f64)
        a = layer.eval()(H).data
        layer.train()
        b = layer(H).data
        assert np.array_equal(a, layer.eval()(H).data) and not np.array_equal(a, b)

    def test_shape_errors(self, rng):
        layer = sgcn_layer(rng, 4, 3, 3)
        with pytest.raises(DimensionError):
            sgcn_forward(Tensor(np.ones((2, 5, 3))), layer)
        with pytest.raises(DimensionError):
            sgcn_forward(Tensor(np.ones((2, 4, 2))), layer)


class TestTGCN:
    def test_identity_case(self, rng):
        layer = TGCNLayer(5, 3, 3, make_rng(0), dtype=f64)
        layer.graph.A_t.data[...] = np.eye(5)
        layer.W_t.data[...] = np.eye(3)
        layer.slope.data[...] = 1.0
        H = rng.normal(size=(5, 4, 3))
        np.testing.assert_array_equal(layer(Tensor(H, dtype=f64)).data, H)

    def test_shift_matrix(self, rng):
        layer = TGCNLayer(5, 3, 3, make_rng(0), dtype=f64)
        layer.graph.A_t.data[...] = np.eye(5, k=-1)
        layer.W_t.data[...] = np.eye(3)
        layer.slope.data[...] = 1.0
        H = rng.normal(size=(5, 4, 3))
        out = layer(Tensor(H, dtype=f64)).data
        assert not out[0].any()
        np.testing.assert_array_equal(out[1:], H[:-1])

    def test_scalar_loop_oracle(self, rng):
        layer = tgcn_layer(rng, 4, 3, 2)
        H = rng.normal(size=(4, 5, 3))
        want = oracles.tgcn(H.tolist(), layer.T_t.data.tolist(), layer.graph.A_t.data.tolist(),
                            layer.W_t.data.tolist(), float(layer.slope.data[0]))
        assert np.max(np.abs(layer(Tensor(H, dtype=f64)).data - np.array(want))) <= 1e-10

    def test_batched_equals_per_sample(self, rng):
        layer = tgcn_layer(rng, 4, 3, 3)
        H = rng.normal(size=(3, 4, 5, 3))
        batched = layer(Tensor(H, dtype=f64)).data
        for b in range(3):
            np.testing.assert_allclose(batched[b], layer(Tensor(H[b], dtype=f64)).data,
                                       atol=1e-13)

    def test_wrong_T(self, rng):
        with pytest.raises(DimensionError):
            tgcn_forward(Tensor(np.ones((3, 4, 3))), tgcn_layer(rng, 4, 3, 3))


class TestBlock:
    def test_zero_weights_are_pure_residual(self, rng):
        sg = SGCNLayer(init_spatial_adjacency(JOINT, build_mask(JOINT, 2), dtype=f64), 4, 4,
                       make_rng(0), dtype=f64)
        tg = TGCNLayer(3, 4, 4, make_rng(0), dtype=f64)
        sg.W_s.data[...] = 0
        tg.W_t.data[...] = 0
        H = rng.normal(size=(3, 22, 4))
        np.testing.assert_array_equal(STGCNBlock(sg, tg)(Tensor(H, dtype=f64)).data, H)

    def test_seven_blocks_keep_shape(self):
        h = Tensor(np.ones((10, 22, 8)))
        for _ in range(7):
            sg = SGCNLayer(init_spatial_adjacency(JOINT, build_mask(JOINT, 2)), 8, 8, make_rng(0))
            h = STGCNBlock(sg, TGCNLayer(10, 8, 8, make_rng(0)))(h)
        assert h.shape == (10, 22, 8)

    def test_width_mismatch(self):
        g = init_spatial_adjacency(JOINT, build_mask(JOINT, 2))
        with pytest.raises(ConfigError):
            STGCNBlock(SGCNLayer(g, 4, 5, make_rng(0)), None)
        with pytest.raises(ConfigError):
            STGCNBlock(SGCNLayer(g, 4, 4, make_rng(0)), TGCNLayer(3, 5, 5, make_rng(0)))
        block = STGCNBlock(SGCNLayer(g, 4, 4, make_rng(0)), None)
        with pytest.raises(ConfigError):
            stgcn_block(Tensor(np.ones((3, 22, 5))), block)

    def test_without_tgcn(self, rng):
        sg = SGCNLayer(init_spatial_adjacency(JOINT, build_mask(JOINT, 2), dtype=f64), 4, 4,
                       make_rng(0), dtype=f64)
        H = Tensor(rng.normal(size=(3, 22, 4)), dtype=f64)
        np.testing.assert_allclose(STGCNBlock(sg, None)(H).data, H.data + sg(H).data)


class TestFuse:
    def unit(self, rng, alpha):
        return FusionUnit(rng.normal(size=(10, 5)), rng.normal(size=(22, 10)), alpha, dtype=f64)

    def inputs(self, rng, C=3):
        return [Tensor(rng.normal(size=(V, C)), dtype=f64) for V in (5, 10, 22)]

    def test_alpha_zero_returns_fine_bitwise(self, rng):
        X3, X2, X1 = self.inputs(rng)
        out = fuse(X3, X2, X1, self.unit(rng, 0.0)).data
        assert out.tobytes() == X1.data.tobytes()

    def test_alpha_one_is_pure_upsampling(self, rng):
        X3, X2, X1 = self.inputs(rng)
        u = self.unit(rng, 1.0)
        want = u.W_21.data @ u.W_32.data @ X3.data
        np.testing.assert_allclose(fuse(X3, X2, X1, u).data, want, atol=1e-12)

    def test_scalar_oracle(self, rng):
        X3, X2, X1 = self.inputs(rng)
        u = self.unit(rng, 0.5)
        want = oracles.fuse(X3.data.tolist(), X2.data.tolist(), X1.data.tolist(),
                            u.W_32.data.tolist(), u.W_21.data.tolist(), 0.5)
        assert np.max(np.abs(fuse(X3, X2, X1, u).data - np.array(want))) <= 1e-10

    def test_missing_scales(self, rng):
        X3, X2, X1 = self.inputs(rng)
        u = self.unit(rng, 0.3)
        assert fuse(None, None, X1, u) is X1
        want = 0.3 * u.W_21.data @ X2.data + 0.7 * X1.data
        np.testing.assert_allclose(fuse(None, X2, X1, u).data, want, atol=1e-12)

    def test_learned_alpha_starts_at_alpha(self, rng):
        u = FusionUnit(np.ones((10, 5)), np.ones((22, 10)), 0.3, learn_alpha=True, dtype=f64)
        assert u.coefficient().item() == pytest.approx(0.3, abs=1e-12)

    def test_errors(self, rng):
        X3, X2, X1 = self.inputs(rng)
        with pytest.raises(ConfigError):
            FusionUnit(None, None, alpha=1.5)
        with pytest.raises(DimensionError):
            fuse(X3, X1, X1, self.unit(rng, 0.5))
        with pytest.raises(DimensionError):
            fuse(X3, X2, Tensor(np.ones((22, 4)), dtype=f64), self.unit(rng, 0.5))


class TestTCN:
    def test_shape_contract(self):
        dec = TCNDecoder(10, 25, 4, make_rng(0))
        assert dec(Tensor(np.ones((10, 22, 3)))).shape == (25, 22, 3)
        assert [l.weight.shape for l in dec.layers] == [(25, 10)] + [(25, 25)] * 3

    def test_zero_weights_copy_last_pose(self, rng):
        dec = TCNDecoder(10, 25, 4, make_rng(0), residual=True, dtype=f64)
        for p in dec.parameters():
            p.data[...] = 0
        last = rng.normal(size=(22, 3))
        out = dec(Tensor(rng.normal(size=(10, 22, 3)), dtype=f64), last).data
        assert all(np.array_equal(frame, last) for frame in out)

    def test_matrix_chain_oracle(self, rng):
        dec = decoder(rng, 4, 6)
        feats = rng.normal(size=(4, 5, 3))
        want = oracles.tcn_decode(feats.tolist(), decoder_layers(dec))
        assert np.max(np.abs(dec(Tensor(feats, dtype=f64)).data - np.array(want))) <= 1e-10

    def test_residual_adds_last(self, rng):
        dec = decoder(rng, 4, 6, residual=True)
        feats, last = rng.normal(size=(4, 5, 3)), rng.normal(size=(5, 3))
        want = oracles.tcn_decode(feats.tolist(), decoder_layers(dec), last.tolist())
        got = tcn_decode(Tensor(feats, dtype=f64), dec, last).data
        assert np.max(np.abs(got - np.array(want))) <= 1e-10

    def test_wrong_T(self):
        with pytest.raises(DimensionError):
            TCNDecoder(10, 25, 4, make_rng(0))(Tensor(np.ones((9, 22, 3))))

    def test_needs_a_layer(self):
        with pytest.raises(ConfigError):
            TCNDecoder(10, 25, 0, make_rng(0))


@pytest.mark.parametrize("name", sorted(LAYER_CHECKS))
def test_finite_differences(name):
    info = {}
    assert LAYER_CHECKS[name](report=info) <= LAYER_TOL
    assert info["checked"] > 0
