import json

import numpy as np
import pytest

from dmsgcn.errors import (
    ChecksumError,
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    ConfigMismatchError,
    DimensionError,
    TruncatedCheckpointError,
)
from dmsgcn.model import (
    DMSGCNModel,
    ModelConfig,
    forward,
    load,
    mask_zero_count,
    param_count,
    read_manifest,
    save,
)
from dmsgcn.nn import Parameter
from dmsgcn.skeleton import build_mask, default_hierarchy
from dmsgcn.tensor import no_grad

SMALL = dict(hidden_width=8, blocks_per_scale=1, tcn_layers=2, dropout=0.0)


def small(**kw):
    return DMSGCNModel(ModelConfig(**{**SMALL, **kw}))


def run(model, x):
    with no_grad():
        return model.eval().forward_frames(x).data


class TestForward:
    def test_channel_major_shape(self, rng):
        out = small()(rng.normal(size=(2, 3, 10, 22)))
        assert out.shape == (2, 3, 25, 22)

    def test_layouts_agree(self, rng):
        model = small().eval()
        x = rng.normal(size=(2, 10, 22, 3)) * 100
        with no_grad():
            a = forward(np.transpose(x, (0, 3, 1, 2)), model).data
        np.testing.assert_array_equal(np.transpose(a, (0, 2, 3, 1)), run(model, x))

    @pytest.mark.parametrize("shape", [(2, 3, 9, 22), (2, 3, 10, 21), (2, 4, 10, 22), (3, 10, 22)])
    def test_wrong_shape(self, shape):
        with pytest.raises(DimensionError):
            small()(np.zeros(shape))

    @pytest.mark.parametrize("relative", [True, False])
    def test_zero_weights_copy_last_frame(self, rng, relative):
        model = small(relative_input=relative).zero_weights()
        x = rng.normal(size=(3, 10, 22, 3)) * 300
        out = run(model, x)
        want = np.repeat(x[:, -1:].astype(np.float32), 25, axis=1)
        np.testing.assert_array_equal(out, want)

    def test_default_zero_weights_fixed_point(self, rng):
        x = rng.normal(size=(1, 10, 22, 3)) * 300
        out = run(DMSGCNModel().zero_weights(), x)
        assert np.array_equal(out, np.repeat(x[:, -1:].astype(np.float32), 25, axis=1))

    def test_scale_count_changes_output(self, rng):
        x = rng.normal(size=(2, 10, 22, 3)) * 100
        assert not np.allclose(run(small(scales_enabled=1), x), run(small(scales_enabled=3), x))

    def test_dropout_is_off_in_eval(self, rng):
        model = small(dropout=0.5)
        x = rng.normal(size=(2, 10, 22, 3))
        np.testing.assert_array_equal(run(model, x), run(model, x))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(scales_enabled=4), dict(dropout=1.0), dict(alpha=-0.1), dict(T=1),
        dict(fusion_space="edges"), dict(dtype="int8"), dict(hidden_width=0),
        dict(relative_input=True, residual_decoder=False),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            ModelConfig(**kw)

    def test_dict_round_trip(self):
        cfg = ModelConfig(hidden_width=12, alpha=0.25)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"hidden": 3})


class TestCounts:
    def test_default_parameter_count_in_band(self):
        assert 200_000 <= param_count(DMSGCNModel()) <= 500_000

    def test_mask_difference_equals_masked_entries(self):
        h = default_hierarchy()
        per_block = sum(int((build_mask(s, 2) == 0).sum()) for s in h.skeletons)
        on, off = DMSGCNModel(), DMSGCNModel(ModelConfig(mask_enabled=False))
        assert per_block == 364 + 44 + 0
        assert mask_zero_count(on) == 7 * per_block == 2856
        assert param_count(off) - param_count(on) == 2856

    def test_masked_adjacency_starts_at_zero(self):
        for name, p in DMSGCNModel().named_parameters():
            if p.freeze_mask is not None:
                assert not p.data[~p.freeze_mask].any(), name

    def test_ablations_have_distinct_counts(self):
        variants = [ModelConfig(), ModelConfig(scales_enabled=1), ModelConfig(scales_enabled=2),
                    ModelConfig(mask_enabled=False), ModelConfig(tgcn_enabled=False)]
        counts = [param_count(DMSGCNModel(c)) for c in variants]
        assert len(set(counts)) == len(counts)

    def test_names_are_unique_and_stable(self):
        a = [n for n, _ in DMSGCNModel().named_parameters()]
        assert len(a) == len(set(a)) == len(DMSGCNModel().parameters())
        assert a == [n for n, _ in DMSGCNModel().named_parameters()]

    def test_seeded_init(self):
        a, b, c = DMSGCNModel(), DMSGCNModel(), DMSGCNModel(ModelConfig(seed=1))
        sa, sb, sc = a.state_dict(), b.state_dict(), c.state_dict()
        assert all(np.array_equal(sa[k], sb[k]) for k in sa)
        assert any(not np.array_equal(sa[k], sc[k]) for k in sa)


class TestCheckpoint:
    def test_round_trip_is_bitwise(self, tmp_path, rng):
        model = small(seed=3)
        for p in model.parameters():
            p.data[...] += rng.normal(size=p.shape).astype(np.float32) * (
                1 if p.freeze_mask is None else p.freeze_mask)
        save(model, tmp_path / "ck")
        back = load(tmp_path / "ck")
        for name, value in model.state_dict().items():
            assert back.state_dict()[name].tobytes() == value.tobytes()
        x = rng.normal(size=(2, 10, 22, 3))
        np.testing.assert_array_equal(run(model, x), run(back, x))

    def test_files_are_little_endian_float32(self, tmp_path):
        model = small()
        save(model, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        entry = manifest["parameters"][0]
        raw = (tmp_path / entry["file"]).read_bytes()
        assert entry["bytes"] == len(raw) == 4 * int(np.prod(entry["shape"]))
        value = np.frombuffer(raw, "<f4").reshape(entry["shape"])
        assert value.tobytes() == model.state_dict()[entry["name"]].astype("<f4").tobytes()

    def test_save_twice_is_identical(self, tmp_path):
        save(small(), tmp_path / "a")
        save(small(), tmp_path / "b")
        for f in sorted((tmp_path / "a").rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()

    def test_corrupt_byte(self, tmp_path):
        save(small(), tmp_path)
        f = next((tmp_path / "params").iterdir())
        raw = bytearray(f.read_bytes())
        raw[0] ^= 0xFF
        f.write_bytes(bytes(raw))
        with pytest.raises(ChecksumError):
            load(tmp_path)

    def test_truncated(self, tmp_path):
        save(small(), tmp_path)
        f = next((tmp_path / "params").iterdir())
        f.write_bytes(f.read_bytes()[:-4])
        with pytest.raises(TruncatedCheckpointError):
            load(tmp_path)

    def test_missing_file(self, tmp_path):
        save(small(), tmp_path)
        next((tmp_path / "params").iterdir()).unlink()
        with pytest.raises(TruncatedCheckpointError):
            load(tmp_path)

    def test_config_mismatch(self, tmp_path):
        save(small(), tmp_path)
        load(tmp_path, ModelConfig(**SMALL))
        with pytest.raises(ConfigMismatchError, match="hidden_width"):
            load(tmp_path, ModelConfig(**{**SMALL, "hidden_width": 9}))

    def test_version(self, tmp_path):
        save(small(), tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["format_version"] += 1
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(CheckpointVersionError):
            read_manifest(tmp_path)

    def test_tampered_config(self, tmp_path):
        save(small(), tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["config"]["model"]["alpha"] = 0.9
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(ChecksumError):
            load(tmp_path)

    def test_no_manifest(self, tmp_path):
        with pytest.raises(CheckpointError):
            load(tmp_path)

    def test_load_state_dict_checks(self):
        model = small()
        state = model.state_dict()
        with pytest.raises(ConfigMismatchError):
            model.load_state_dict({k: v for k, v in list(state.items())[1:]})
        name = next(iter(state))
        with pytest.raises(ConfigMismatchError):
            model.load_state_dict({**state, name: np.zeros(3)})


def test_parameter_freeze_mask_shape():
    with pytest.raises(DimensionError):
        Parameter(np.zeros((2, 2)), freeze_mask=np.ones(3, bool))
