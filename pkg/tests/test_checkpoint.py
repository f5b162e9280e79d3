import json
import struct

import numpy as np
import pytest

from berngraph.baselines import init_linear, init_mlp
from berngraph.checkpoint import (FORMAT_VERSION, CheckpointError, load_checkpoint,
                                  model_from_checkpoint, save_checkpoint)
from berngraph.gnn import GNNModel, init_params
from berngraph.optim import adam_init, adam_step

from _fixtures import random_edges


def trained_state(arrays, steps=3):
    state = adam_init(arrays)
    rng = np.random.default_rng(0)
    for _ in range(steps):
        grads = {k: rng.normal(size=a.shape).astype(a.dtype) for k, a in arrays.items()}
        arrays, state = adam_step(arrays, grads, state, 1e-3)
    return arrays, state


def gnn_model(m=5, c=2, dtype=np.float64):
    edges = random_edges(np.random.default_rng(1), m)
    return GNNModel(init_params(m, c, hidden=4, layers=2, seed=2, dtype=dtype), edges), edges


class TestRoundTrip:
    def test_gnn_bitwise(self, tmp_path):
        model, edges = gnn_model()
        arrays, state = trained_state(model.arrays)
        model.set_arrays(arrays)
        save_checkpoint(model, state, tmp_path / "m.ckpt", hyper={"learning_rate": 1e-4})
        ck = load_checkpoint(tmp_path / "m.ckpt")
        assert ck.kind == "gnn" and ck.dims == {"M": 5, "C": 2, "d": 4, "K": 2}
        assert list(ck.arrays) == list(model.arrays)
        for k in arrays:
            assert ck.arrays[k].tobytes() == arrays[k].tobytes()
            assert ck.state.m[k].tobytes() == state.m[k].tobytes()
            assert ck.state.v[k].tobytes() == state.v[k].tobytes()
        assert ck.state.step == 3
        again = model_from_checkpoint(ck, edges)
        x = np.random.default_rng(3).random((4, 5))
        assert np.array_equal(again.predict_proba(x), model.predict_proba(x))

    def test_float32_round_trip(self, tmp_path):
        model, _ = gnn_model(dtype=np.float32)
        save_checkpoint(model, None, tmp_path / "m.ckpt")
        ck = load_checkpoint(tmp_path / "m.ckpt")
        assert ck.state is None
        for k, a in model.arrays.items():
            assert ck.arrays[k].dtype == np.float32 and np.array_equal(ck.arrays[k], a)

    @pytest.mark.parametrize("kind", ["lr", "mlp"])
    def test_baselines(self, tmp_path, kind):
        model = init_linear(6, 3, l2=0.5) if kind == "lr" else init_mlp(6, 3, hidden=5, seed=1)
        arrays, state = trained_state(model.arrays)
        model.set_arrays(arrays)
        save_checkpoint(model, state, tmp_path / "b.ckpt")
        ck = load_checkpoint(tmp_path / "b.ckpt", expected_dims={"M": 6, "C": 3})
        assert ck.kind == kind
        again = model_from_checkpoint(ck)
        x = np.random.default_rng(0).random((3, 6))
        assert np.array_equal(again.predict_proba(x), model.predict_proba(x))
        if kind == "lr":
            assert again.l2 == 0.5

    def test_layout(self, tmp_path):
        model, _ = gnn_model()
        save_checkpoint(model, adam_init(model.arrays), tmp_path / "m.ckpt")
        data = (tmp_path / "m.ckpt").read_bytes()
        (n,) = struct.unpack_from("<I", data, 8)
        header = json.loads(data[12:12 + n])
        assert header["format_version"] == FORMAT_VERSION
        assert [a["name"] for a in header["arrays"]][:2] == ["W_in", "b_in"]
        assert [a["name"] for a in header["arrays"]][-2:] == ["W_read", "b_read"]
        payload = np.frombuffer(data[12 + n:], dtype="<f8")
        n_params = sum(a.size for a in model.arrays.values())
        assert payload.size == 3 * n_params
        assert payload[0] == model.arrays["W_in"][0, 0]


class TestErrors:
    def save(self, tmp_path):
        model, _ = gnn_model()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, adam_init(model.arrays), path)
        return path

    def test_wrong_m(self, tmp_path):
        with pytest.raises(CheckpointError, match="shape mismatch"):
            load_checkpoint(self.save(tmp_path), expected_dims={"M": 7})

    def test_truncated(self, tmp_path):
        path = self.save(tmp_path)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_corrupted(self, tmp_path):
        path = self.save(tmp_path)
        data = bytearray(path.read_bytes())
        data[-3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path)

    def test_version(self, tmp_path):
        path = self.save(tmp_path)
        data = path.read_bytes()
        (n,) = struct.unpack_from("<I", data, 8)
        header = json.loads(data[12:12 + n])
        header["format_version"] = FORMAT_VERSION + 1
        blob = json.dumps(header).encode()
        path.write_bytes(data[:8] + struct.pack("<I", len(blob)) + blob + data[12 + n:])
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"hello world, definitely not a model")
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "none.ckpt")

    def test_gnn_needs_edges(self, tmp_path):
        ck = load_checkpoint(self.save(tmp_path))
        with pytest.raises(CheckpointError):
            model_from_checkpoint(ck)
        with pytest.raises(CheckpointError):
            model_from_checkpoint(ck, random_edges(np.random.default_rng(0), 6))
