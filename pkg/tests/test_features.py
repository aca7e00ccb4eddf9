import json

import numpy as np
import pytest

from oracles import crafted_file, dht, dqt, naive_dct_histogram, seg, sof, sos
from sharechain.features import (
    DCT_DIM, FEATURE_NAMES, HEADER_DIM, META_DIM, FeatureError, FeatureRecord, JpegFeatureExtractor,
    extract_all, extract_batch, extract_dct, extract_header, extract_meta, read_jsonl, write_jsonl,
)
from sharechain.chains import SharingChain
from sharechain.jpeg import parse_container, scan_segments
from sharechain.jpeg.tables import quality_tables
from sharechain.simulator import PlatformProfile, apply_platform


def test_dct_constant_plane():
    f = extract_dct(np.full((16, 24), 128, dtype=np.uint8)).reshape(9, 41)
    assert f.shape == (9, 41) and np.all(f[:, 20] == 1.0)
    assert f.sum() == 9.0


@pytest.mark.parametrize("seed", range(5))
def test_dct_matches_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(8, 41, size=2)
    plane = rng.integers(0, 256, (h, w), dtype=np.uint8)
    assert np.allclose(extract_dct(plane), naive_dct_histogram(plane), atol=1e-9, rtol=0)


def test_dct_smooth_plane_oracle():
    y, x = np.mgrid[0:32, 0:32]
    plane = (128 + 12 * np.sin(x / 3.0) + 9 * np.cos(y / 5.0)).astype(np.uint8)
    assert np.allclose(extract_dct(plane), naive_dct_histogram(plane), atol=1e-9, rtol=0)


def test_dct_group_sums_and_partial_blocks():
    rng = np.random.default_rng(1)
    plane = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    f = extract_dct(plane)
    assert f.shape == (DCT_DIM,)
    assert np.all(f.reshape(9, 41).sum(axis=1) <= 1 + 1e-9)
    padded = np.pad(plane, ((0, 5), (0, 7)), constant_values=17)
    assert np.array_equal(f, extract_dct(padded))
    with pytest.raises(ValueError):
        extract_dct(np.zeros((7, 64), dtype=np.uint8))


def test_meta_layout(baseline_jpeg):
    c = parse_container(baseline_jpeg)
    m = extract_meta(c)
    assert m.shape == (META_DIM,)
    luma, chroma = quality_tables(80)
    assert list(m[:64]) == list(luma) and list(m[64:128]) == list(chroma)
    assert list(m[128:130]) == [2, 2]
    assert list(m[130:136]) == [1, 2, 2, 0, 0, 0]
    assert list(m[136:142]) == [2, 1, 1, 1, 1, 1]
    assert list(m[148:150]) == [0, 0]
    assert list(m[150:152]) == [48, 40]


def test_meta_grayscale_zero_fill(gray_jpeg):
    m = extract_meta(parse_container(gray_jpeg))
    assert np.all(m[64:128] == 0)
    assert np.all(m[136:148] == 0)
    assert list(m[130:136]) == [1, 1, 1, 0, 0, 0]


def test_meta_is_container_only():
    a = crafted_file(dqt(), sof(), sos(), entropy=b"\x01\x02\x03")
    b = crafted_file(dqt(), sof(), sos(), entropy=b"\x55\x66\x77\x88")
    assert np.array_equal(extract_meta(parse_container(a)), extract_meta(parse_container(b)))


def test_header_counts():
    data = crafted_file(dqt(), dht(0, 0), dht(1, 0), sof(), sos())
    assert list(extract_header(scan_segments(data))) == [2, 0, 0, 0, 1, 0, 0, 0]
    dri = seg(0xDD, b"\x00\x08")
    h = extract_header(scan_segments(crafted_file(dqt(), sof(), dri, sos())))
    assert h[7] >= 1 and h.shape == (HEADER_DIM,)


@pytest.mark.parametrize("seed", range(3))
def test_header_ignores_entropy_content(baseline_jpeg, seed):
    scan = scan_segments(baseline_jpeg)
    region = scan.entropy[0]
    noise = np.random.default_rng(seed).integers(0, 255, region.length, dtype=np.uint8).tobytes()
    mutated = baseline_jpeg[:region.offset] + noise + baseline_jpeg[region.offset + region.length:]
    assert np.array_equal(extract_header(scan_segments(mutated)), extract_header(scan))


def test_header_from_injecting_profile(baseline_jpeg):
    prof = PlatformProfile("x", quality=80, inject_segments=("APP13", "APP2"))
    h = extract_header(scan_segments(apply_platform(baseline_jpeg, prof)))
    assert h[2] == 1 and h[3] == 1


def test_extract_all_subsets(baseline_jpeg):
    rec = extract_all(baseline_jpeg, FEATURE_NAMES, id="a", label=SharingChain.of("FB"))
    assert rec.available() == FEATURE_NAMES
    with pytest.raises(ValueError):
        extract_all(baseline_jpeg, [])
    with pytest.raises(ValueError):
        extract_all(baseline_jpeg, ["dct", "exif"])


def test_header_only_skips_decoding(baseline_jpeg):
    scan = scan_segments(baseline_jpeg)
    region = scan.entropy[0]
    corrupt = baseline_jpeg[:region.offset + 10]
    assert extract_all(corrupt, ["header"]).header is not None
    with pytest.raises(FeatureError) as info:
        extract_all(corrupt, ["dct"])
    assert info.value.descriptor == "dct"


def test_jsonl_round_trip(tmp_path, baseline_jpeg):
    recs = [extract_all(baseline_jpeg, id=f"r{i}", label=SharingChain.of("TW", "FB")) for i in range(3)]
    recs.append(extract_all(baseline_jpeg, ["header"], id="h"))
    path = tmp_path / "f.jsonl"
    write_jsonl(recs, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4 and json.loads(lines[0])["label"] == "TW>FB"
    back = read_jsonl(path)
    for a, b in zip(recs, back):
        assert a.id == b.id and a.label == b.label
        for n in FEATURE_NAMES:
            va, vb = getattr(a, n), getattr(b, n)
            assert (va is None and vb is None) or np.array_equal(va, vb)


def test_batch_order_and_threads(baseline_jpeg, gray_jpeg):
    items = [(str(i), baseline_jpeg if i % 2 else gray_jpeg, None) for i in range(6)]
    one = extract_batch(items, threads=1)
    many = extract_batch(items, threads=3)
    assert [r.id for r in many] == [str(i) for i in range(6)]
    assert all(np.array_equal(a.dct, b.dct) for a, b in zip(one, many))


def test_transformer(baseline_jpeg):
    t = JpegFeatureExtractor(features=("header", "meta")).fit([baseline_jpeg])
    X = t.transform([baseline_jpeg, baseline_jpeg])
    assert X.shape == (2, META_DIM + HEADER_DIM) == (2, t.n_features_out_)
    assert FeatureRecord("x").available() == ()
