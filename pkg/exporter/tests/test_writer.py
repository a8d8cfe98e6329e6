import numpy as np
import pytest

from nnwt_exporter.writer import ArchiveError, read_archive, write_archive


def sample_tensors(seed=0):
    r = np.random.default_rng(seed)
    return {
        "a.weight": r.normal(size=(4, 3, 3, 3)).astype(np.float32),
        "a.bias": r.normal(size=4).astype(np.float32),
        "b.scale": r.normal(size=7).astype(np.float32),
    }


def test_round_trip(tmp_path):
    tensors = sample_tensors()
    path = tmp_path / "w.nnwt"
    write_archive(path, tensors, "vgg16", (0.485, 0.456, 0.406), (0.229, 0.224, 0.225), 224)
    back, meta = read_archive(path)
    assert meta["backbone"] == "vgg16"
    assert meta["input_resolution"] == 224
    for name in tensors:
        assert back[name].tobytes() == tensors[name].tobytes()


def test_write_is_deterministic(tmp_path):
    a, b = tmp_path / "a.nnwt", tmp_path / "b.nnwt"
    write_archive(a, sample_tensors(), "vgg16", (0.5,) * 3, (0.5,) * 3, 224)
    write_archive(b, sample_tensors(), "vgg16", (0.5,) * 3, (0.5,) * 3, 224)
    assert a.read_bytes() == b.read_bytes()


def test_corruption_detected(tmp_path):
    path = tmp_path / "w.nnwt"
    write_archive(path, sample_tensors(), "vgg16", (0.5,) * 3, (0.5,) * 3, 224)
    blob = bytearray(path.read_bytes())
    blob[30] ^= 0x40
    path.write_bytes(bytes(blob))
    with pytest.raises(ArchiveError):
        read_archive(path)


def test_truncation_detected(tmp_path):
    path = tmp_path / "w.nnwt"
    write_archive(path, sample_tensors(), "vgg16", (0.5,) * 3, (0.5,) * 3, 224)
    path.write_bytes(path.read_bytes()[:20])
    with pytest.raises(ArchiveError):
        read_archive(path)
