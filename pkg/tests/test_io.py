import numpy as np
import pytest

from codedsnap import io


def test_pgm_roundtrip_8_and_16_bit(tmp_path):
    rng = np.random.default_rng(0)
    a8 = rng.integers(0, 256, (5, 7))
    io.write_pnm(tmp_path / "a.pgm", a8, 255)
    back, maxval = io.read_pnm(tmp_path / "a.pgm")
    assert maxval == 255 and np.array_equal(back, a8)
    a16 = rng.integers(0, 65536, (5, 7))
    io.write_pnm(tmp_path / "b.pgm", a16, 65535)
    back, maxval = io.read_pnm(tmp_path / "b.pgm")
    assert maxval == 65535 and np.array_equal(back, a16)


def test_ppm_and_png_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (6, 4, 3)) / 255.0
    for name in ("c.ppm", "c.png"):
        io.write_image(tmp_path / name, img)
        assert np.array_equal(io.read_image(tmp_path / name), img)


def test_pnm_header_comments(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P5\n# comment\n2 1\n255\n" + bytes([3, 250]))
    data, maxval = io.read_pnm(path)
    assert data.tolist() == [[3, 250]]


def test_pnm_rejects_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(io.DataError):
        io.read_pnm(path)
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(io.DataError):
        io.read_pnm(path)


def test_mask_files(tmp_path):
    m = (np.random.default_rng(2).random((4, 5)) < 0.5).astype(float)
    io.write_mask_pgm(tmp_path / "m.pgm", m)
    assert np.array_equal(io.read_mask_pgm(tmp_path / "m.pgm"), m)
    g = np.random.default_rng(3).random((4, 5))
    io.write_mask_csv(tmp_path / "g.csv", g)
    assert np.array_equal(io.read_mask_csv(tmp_path / "g.csv"), g)
    with pytest.raises(ValueError):
        io.write_mask_pgm(tmp_path / "g.pgm", g)


def test_csv_schema_line(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["a", "b"], [[1, None], [2, 3.5]])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "# schema=1"
    rows = io.read_csv(tmp_path / "t.csv")
    assert rows == [{"a": "1", "b": ""}, {"a": "2", "b": "3.5"}]


def test_kv_roundtrip_and_errors(tmp_path):
    io.write_kv(tmp_path / "c.txt", {"n_t": "8", "mask_mode": "shifted"})
    assert io.read_kv(tmp_path / "c.txt") == {"n_t": "8", "mask_mode": "shifted"}
    (tmp_path / "bad.txt").write_text("just words\n")
    with pytest.raises(ValueError):
        io.read_kv(tmp_path / "bad.txt")
