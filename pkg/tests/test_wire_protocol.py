"""Loopback integration tests for the wire protocol server and client."""

import json
import urllib.request

import numpy as np
import pytest

from partcrop import wire
from partcrop.conformance import run_conformance
from partcrop.encoders import RemoteEncoder, SyntheticEncoder, SyntheticEncoderConfig
from partcrop.harness import generate_synthetic_dataset, load_entry_image
from partcrop.rng import Stream
from partcrop.server import SyntheticEncoderServer


@pytest.fixture(scope="module")
def served():
    manifest, keys = generate_synthetic_dataset(4, 4, (32, 32, 3), seed=50)
    encoder = SyntheticEncoder(
        SyntheticEncoderConfig(seed=2, member_sharpness=8.0, nonmember_sharpness=2.0,
                               member_registry=keys),
        32, 4, 4,
    )
    with SyntheticEncoderServer(encoder) as server:
        yield manifest, encoder, server


def _post_raw(url, path, body: bytes):
    req = urllib.request.Request(
        url + path, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_info_endpoint(served):
    _, encoder, server = served
    client = RemoteEncoder(server.url, 32, 4, 4)
    info = client.info()
    assert info["feature_dim"] == 32
    assert info["map_h"] == 4 and info["map_w"] == 4
    assert info["name"]


def test_map_round_trip_preserves_membership(served):
    manifest, encoder, server = served
    client = RemoteEncoder(server.url, 32, 4, 4)
    member_img = load_entry_image(manifest, manifest.entries[0])
    fm = client.encode_map(member_img)
    # registry lookup is content-keyed, so member sharpness survives the wire
    np.testing.assert_allclose(np.linalg.norm(fm.positions(), axis=1), 8.0, atol=1e-5)


def test_remote_matches_local_in_f32(served):
    manifest, encoder, server = served
    client = RemoteEncoder(server.url, 32, 4, 4)
    img = load_entry_image(manifest, manifest.entries[5])
    local = encoder.encode_map(img).data.astype(np.float32)
    remote = client.encode_map(img).data.astype(np.float32)
    assert np.array_equal(local, remote)


def test_patch_batch_round_trip(served):
    _, encoder, server = served
    client = RemoteEncoder(server.url, 32, 4, 4)
    patches = [
        Stream(i, "wire-patch").uniform(16 * 16 * 3).reshape(16, 16, 3).astype(np.float32)
        for i in range(3)
    ]
    local = encoder.encode_patch_batch(patches).astype(np.float32)
    remote = client.encode_patch_batch(patches).astype(np.float32)
    assert np.array_equal(local, remote)


def test_malformed_body_is_400(served):
    *_, server = served
    status, payload = _post_raw(server.url, wire.ENCODE_MAP_PATH, b"garbage")
    assert status == 400 and "error" in payload
    status, payload = _post_raw(server.url, wire.ENCODE_MAP_PATH, json.dumps({"h": 2}).encode())
    assert status == 400 and "error" in payload


def test_shape_violation_is_422(served):
    *_, server = served
    body = {"h": -1, "w": 4, "c": 3, "pixels": wire.encode_f32(np.zeros(0, dtype=np.float32))}
    status, payload = _post_raw(server.url, wire.ENCODE_MAP_PATH, json.dumps(body).encode())
    assert status == 422 and "error" in payload


def test_unknown_endpoint_is_404(served):
    *_, server = served
    status, _ = _post_raw(server.url, "/v1/nope", b"{}")
    assert status == 404


def test_conformance_suite_passes_against_stub(served):
    *_, server = served
    results = run_conformance(server.url, 32, 4, 4)
    failed = [r for r in results if not r.passed]
    assert not failed, failed
