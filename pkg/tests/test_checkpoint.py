import numpy as np

from cadet.engine import Parameter, load_checkpoint, save_checkpoint
from cadet.engine.rng import Rng


def test_round_trip_is_bit_exact(tmp_path):
    rng = Rng(1)
    params = {
        "backbone.w": Parameter(rng.normal(12).reshape(3, 4).astype(np.float32), "backbone.w",
                                dtype=np.float32),
        "head.b": Parameter(rng.normal(5), "head.b", trainable=False, dtype=np.float64),
    }
    save_checkpoint(tmp_path / "ck", params, meta={"session": 2})
    arrays, meta, trainable = load_checkpoint(tmp_path / "ck")
    assert meta == {"session": 2}
    for name, p in params.items():
        assert arrays[name].dtype == p.data.dtype
        assert arrays[name].tobytes() == p.data.tobytes()
    assert trainable == {"backbone.w": True, "head.b": False}


def test_save_twice_identical_bytes(tmp_path):
    p = {"w": Parameter(np.arange(6, dtype=np.float32).reshape(2, 3), "w", dtype=np.float32)}
    save_checkpoint(tmp_path / "a", p)
    save_checkpoint(tmp_path / "b", p)
    for f in ["manifest.json", "p0000.bin"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
