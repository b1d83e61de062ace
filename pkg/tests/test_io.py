import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fgfrft.data import PLANE_CLOUD, SMOOTH_IMAGE, bundled_path, plane_cloud, smooth_image
from fgfrft.errors import ParseError, SizeError
from fgfrft.io import (
    ImagePatchSet,
    csv_text,
    parse_pgm,
    parse_xyz,
    read_csv,
    read_manifest,
    read_pgm,
    read_xyz,
    split_batches,
    voxel_downsample,
    write_csv,
    write_manifest,
    write_pgm,
    write_xyz,
)


class TestPgm:
    def test_parse_with_comment(self):
        data = b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 1, 2, 250, 251, 255])
        np.testing.assert_array_equal(parse_pgm(data), [[0, 1, 2], [250, 251, 255]])

    def test_bad_magic(self):
        with pytest.raises(ParseError) as info:
            parse_pgm(b"P2\n1 1\n255\n0")
        assert info.value.offset == 0

    def test_truncated_offset(self):
        data = b"P5\n4 4\n255\n" + bytes(10)
        with pytest.raises(ParseError) as info:
            parse_pgm(data)
        assert info.value.offset == len(data)

    def test_bad_width(self):
        with pytest.raises(ParseError) as info:
            parse_pgm(b"P5\nx 4\n255\n")
        assert info.value.offset == 3

    def test_maxval(self):
        with pytest.raises(ParseError):
            parse_pgm(b"P5\n1 1\n65535\n\x00\x00")

    @settings(max_examples=20, deadline=None)
    @given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
    def test_round_trip(self, tmp_path_factory, img):
        path = tmp_path_factory.mktemp("pgm") / "a.pgm"
        write_pgm(path, img)
        np.testing.assert_array_equal(read_pgm(path), img)


class TestXyz:
    def test_parse(self):
        pts = parse_xyz("1 2 3\n\n4.5 -1e3 0\n")
        np.testing.assert_array_equal(pts, [[1, 2, 3], [4.5, -1000, 0]])

    def test_line_number(self):
        with pytest.raises(ParseError) as info:
            parse_xyz("1 2 3\n4 5\n")
        assert info.value.offset == 2
        with pytest.raises(ParseError, match="line 3"):
            parse_xyz("1 2 3\n4 5 6\n7 8 z\n")

    @settings(max_examples=20, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 20), st.just(3)),
                  elements=st.floats(-1e9, 1e9, allow_nan=False)))
    def test_round_trip(self, tmp_path_factory, pts):
        path = tmp_path_factory.mktemp("xyz") / "a.xyz"
        write_xyz(path, pts)
        np.testing.assert_array_equal(read_xyz(path), pts)


class TestBatches:
    def test_tail_merged(self):
        assert split_batches(10, 4, min_size=3) == [slice(0, 4), slice(4, 10)]

    def test_tail_kept(self):
        assert split_batches(10, 4, min_size=2) == [slice(0, 4), slice(4, 8), slice(8, 10)]

    def test_single(self):
        assert split_batches(3, 4000) == [slice(0, 3)]

    def test_voxel(self):
        pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [1.5, 0, 0]])
        np.testing.assert_array_equal(voxel_downsample(pts, 1.0), pts[[0, 2]])
        np.testing.assert_array_equal(voxel_downsample(pts, 0), pts)


class TestPatches:
    def test_lossless(self):
        img = np.arange(128 * 64, dtype=np.uint8).reshape(64, 128)
        ps = ImagePatchSet.from_image(img, 32)
        assert len(ps.patches) == 8
        np.testing.assert_array_equal(ps.reassemble(), img)
        # row-major order
        np.testing.assert_array_equal(ps.patches[1], img[:32, 32:64])

    def test_not_divisible(self):
        with pytest.raises(SizeError, match="crop to 64x64"):
            ImagePatchSet.from_image(np.zeros((70, 65)), 64)


class TestCsv:
    def test_round_trip(self, tmp_path):
        rows = [[1, 0.1, "fast"], [2, 1e-300, "exact"]]
        write_csv(tmp_path / "a.csv", ["n", "x", "b"], rows)
        header, body = read_csv(tmp_path / "a.csv")
        assert header == ["n", "x", "b"]
        assert [[int(a), float(b), c] for a, b, c in body] == rows

    def test_crlf(self):
        assert csv_text(["a"], [[0.5]]) == "a\r\n0.5\r\n"

    def test_manifest(self, tmp_path):
        write_manifest(tmp_path / "m.txt", {"command": "sweep", "seed": 3, "x": 0.25})
        assert read_manifest(tmp_path / "m.txt") == {"command": "sweep", "seed": "3", "x": "0.25"}


class TestBundledData:
    def test_image_regenerates(self):
        np.testing.assert_array_equal(read_pgm(bundled_path(SMOOTH_IMAGE)), smooth_image())

    def test_cloud_regenerates(self):
        np.testing.assert_array_equal(read_xyz(bundled_path(PLANE_CLOUD)), plane_cloud())
