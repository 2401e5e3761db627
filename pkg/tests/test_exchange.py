"""Exchange format: header layout, round-trips, and the load-time norm policy."""

import json
import struct

import numpy as np
import pytest

from panc.errors import DegenerateVectorError, FormatError
from panc.exchange import (
    MAGIC,
    NORM_ACCEPT,
    NORM_REPAIR,
    VERSION,
    ImageMeta,
    l2_normalize,
    make_grid,
    read_sidecar,
    read_token_grid,
    write_token_grid,
)

from helpers import grid_from_tokens, make_meta, unit_rows

HEADER_SIZE = 24  # 4s + 4 * u32 + u8 + 3 pad


def write_sample(tmp_path, rng, grid_h=3, grid_w=4, d=16, cls=False):
    tokens = unit_rows(rng, grid_h * grid_w, d)
    c = unit_rows(rng, 1, d)[0] if cls else None
    grid = grid_from_tokens(tokens, grid_h, grid_w, cls=c)
    path = tmp_path / "sample.panc"
    write_token_grid(grid, path)
    return grid, path


def test_header_layout(tmp_path, rng):
    _, path = write_sample(tmp_path, rng, grid_h=2, grid_w=5, d=8)
    raw = path.read_bytes()
    magic, version, gh, gw, dim, has_cls = struct.unpack_from("<4sIIIIB3x", raw, 0)
    assert magic == MAGIC == b"PANC"
    assert version == VERSION == 1
    assert (gh, gw, dim, has_cls) == (2, 5, 8, 0)
    assert len(raw) == HEADER_SIZE + 4 * 2 * 5 * 8


def test_round_trip_bit_exact(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng, cls=True)
    back = read_token_grid(path)
    assert back.tokens.dtype == np.float32
    assert back.tokens.tobytes() == grid.tokens.tobytes()
    assert back.cls is not None and back.cls.tobytes() == grid.cls.tobytes()
    assert back.meta == grid.meta
    # A second write of the reloaded grid is byte-identical.
    again = tmp_path / "again.panc"
    write_token_grid(back, again)
    assert again.read_bytes() == path.read_bytes()


def test_round_trip_without_cls(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng, cls=False)
    back = read_token_grid(path)
    assert back.cls is None
    assert np.array_equal(back.tokens, grid.tokens)


def test_sidecar_contents(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng)
    doc = json.loads((tmp_path / "sample.panc.meta.json").read_text())
    assert doc == {
        "image_id": "img",
        "source_h": grid.meta.source_h,
        "source_w": grid.meta.source_w,
        "patch": 16,
        "backbone_tag": "test",
    }
    assert read_sidecar(path) == grid.meta


def test_bad_magic_rejected(tmp_path, rng):
    _, path = write_sample(tmp_path, rng)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"JUNK"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        read_token_grid(path)


def test_bad_version_rejected(tmp_path, rng):
    _, path = write_sample(tmp_path, rng)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        read_token_grid(path)


def test_bad_cls_flag_rejected(tmp_path, rng):
    _, path = write_sample(tmp_path, rng)
    raw = bytearray(path.read_bytes())
    raw[20] = 7
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="has_cls"):
        read_token_grid(path)


def test_truncated_payload_rejected(tmp_path, rng):
    _, path = write_sample(tmp_path, rng)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(FormatError, match="truncated"):
        read_token_grid(path)


def test_missing_sidecar_rejected(tmp_path, rng):
    _, path = write_sample(tmp_path, rng)
    (tmp_path / "sample.panc.meta.json").unlink()
    with pytest.raises(FormatError, match="sidecar"):
        read_token_grid(path)


def test_non_finite_payload_rejected(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng)
    tokens = grid.tokens.copy()
    tokens[0, 0] = np.nan
    raw = bytearray(path.read_bytes())
    raw[HEADER_SIZE:] = tokens.astype("<f4").tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="non-finite"):
        read_token_grid(path)


def _rescale_payload(path, grid, factor):
    tokens = grid.tokens.astype(np.float64) * factor
    raw = bytearray(path.read_bytes())
    raw[HEADER_SIZE:] = tokens.astype("<f4").tobytes()
    path.write_bytes(bytes(raw))


def test_norm_drift_within_accept_kept_verbatim(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng)
    scaled = grid.tokens.astype(np.float64) * (1.0 + 0.5 * NORM_ACCEPT)
    _rescale_payload(path, grid, 1.0 + 0.5 * NORM_ACCEPT)
    back = read_token_grid(path)
    assert back.tokens.tobytes() == scaled.astype("<f4").tobytes()


def test_norm_drift_below_repair_renormalized(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng)
    _rescale_payload(path, grid, 1.005)
    back = read_token_grid(path)
    norms = np.linalg.norm(back.tokens.astype(np.float64), axis=1)
    assert np.max(np.abs(norms - 1.0)) <= NORM_ACCEPT
    # Direction is preserved by the repair.
    cos = np.sum(back.tokens.astype(np.float64) * grid.tokens.astype(np.float64), axis=1)
    assert np.all(cos > 0.999)


def test_norm_drift_at_repair_limit_rejected(tmp_path, rng):
    grid, path = write_sample(tmp_path, rng)
    _rescale_payload(path, grid, 1.0 + 2 * NORM_REPAIR)
    with pytest.raises(FormatError, match="repair limit"):
        read_token_grid(path)


def test_l2_normalize_unit_rows(rng):
    v = rng.standard_normal((5, 7)) * 3.0
    out = l2_normalize(v)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)


def test_l2_normalize_zero_row_raises():
    v = np.ones((3, 4))
    v[1] = 0.0
    with pytest.raises(DegenerateVectorError) as exc:
        l2_normalize(v)
    assert exc.value.row == 1


def test_make_grid_rejects_token_count_mismatch(rng):
    tokens = unit_rows(rng, 3, 5)  # 15 floats cannot tile a 2x2 grid
    with pytest.raises(ValueError):
        make_grid(tokens, 2, 2, make_meta(2, 2))


def test_meta_validation():
    with pytest.raises(FormatError, match="patch"):
        ImageMeta("x", 32, 32, 0, "t").validate()
    with pytest.raises(FormatError, match="source dims"):
        ImageMeta("x", 0, 32, 16, "t").validate()


def test_single_token_grid_rejected(rng):
    tokens = unit_rows(rng, 1, 4)
    with pytest.raises(FormatError, match="too small"):
        make_grid(tokens, 1, 1, make_meta(1, 1))
