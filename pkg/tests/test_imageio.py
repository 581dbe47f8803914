import numpy as np
import pytest

from pdaccel.imageio import read_image, read_pgm, write_pgm


@pytest.mark.parametrize("bits,tol", [(8, 0.5), (16, 255 / 65535)])
def test_pgm_roundtrip(tmp_path, bits, tol):
    img = np.random.default_rng(0).uniform(0, 255, (7, 11))
    path = tmp_path / "a.pgm"
    write_pgm(path, img, bits=bits)
    back = read_pgm(path)
    assert back.shape == img.shape
    assert np.max(np.abs(back - img)) <= tol


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1\n# another\n255\n" + bytes([0, 255]))
    assert np.array_equal(read_pgm(path), [[0.0, 255.0]])


def test_pgm_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(ValueError):
        read_pgm(p)
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)), bits=12)


def test_png_via_pillow(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    arr = (np.arange(12).reshape(3, 4) * 20).astype(np.uint8)
    Image.fromarray(arr).save(tmp_path / "a.png")
    assert np.array_equal(read_image(tmp_path / "a.png"), arr.astype(float))
