"""Protocol conformance suite for encoder services.

Drives a service through the remote client plus raw HTTP probes and checks
the wire contract: declared shapes, payload layout, determinism, map/batch
consistency, and error codes. Any service passing this suite can back the
harness interchangeably with the synthetic loopback stub.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from . import wire
from .core import avgpool_spatial
from .encoders import RemoteEncoder
from .rng import Stream

CONSISTENCY_TOL = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _raw_post(url: str, path: str, body: bytes, timeout: float) -> tuple[int, dict]:
    req = urllib.request.Request(
        url.rstrip("/") + path,
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            payload = json.loads(exc.read().decode("utf-8"))
        except Exception:
            payload = {}
        return exc.code, payload


def run_conformance(
    url: str,
    feature_dim: int,
    map_h: int,
    map_w: int,
    image_shape: tuple[int, int, int] = (32, 32, 3),
    timeout_s: float = 30.0,
    seed: int = 2024,
) -> list[CheckResult]:
    """Run every conformance check; returns one CheckResult per check."""
    client = RemoteEncoder(url, feature_dim, map_h, map_w, timeout_s)
    results: list[CheckResult] = []

    def check(name: str, fn) -> None:
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail or ""))
        except Exception as exc:
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    h, w, c = image_shape
    image = Stream(seed, "conformance-image").uniform(h * w * c).reshape(h, w, c).astype(np.float32)
    patch_a = image[: max(h // 2, 1), : max(w // 2, 1)].copy()
    patch_b = 1.0 - patch_a

    def info_shape():
        info = client.info()
        declared = (info["feature_dim"], info["map_h"], info["map_w"])
        assert declared == (feature_dim, map_h, map_w), f"/v1/info declares {declared}"
        assert isinstance(info["name"], str) and info["name"], "service name missing"
        return f"name={info['name']}"

    check("info_declares_shape", info_shape)

    def map_shape():
        fmap = client.encode_map(image)
        assert fmap.data.shape == (map_h, map_w, feature_dim), f"got {fmap.data.shape}"
        assert np.all(np.isfinite(fmap.data)), "non-finite feature values"

    check("encode_map_shape", map_shape)

    def deterministic():
        a = client.encode_map(image).data
        b = client.encode_map(image).data
        assert np.array_equal(a, b), "repeated encode_map calls differ"

    check("encode_map_deterministic", deterministic)

    def pooled_consistency():
        fmap = client.encode_map(patch_a)
        pooled = avgpool_spatial(fmap.data)
        batch = client.encode_patch_batch([patch_a])
        err = float(np.max(np.abs(pooled - batch[0])))
        assert err <= CONSISTENCY_TOL, f"map/batch pooled mismatch {err}"
        return f"max_abs_err={err:.2e}"

    check("map_patch_consistency", pooled_consistency)

    def batch_order():
        ab = client.encode_patch_batch([patch_a, patch_b])
        ba = client.encode_patch_batch([patch_b, patch_a])
        assert np.allclose(ab[0], ba[1], atol=CONSISTENCY_TOL), "batch order not preserved"
        assert np.allclose(ab[1], ba[0], atol=CONSISTENCY_TOL), "batch order not preserved"

    check("batch_order_preserved", batch_order)

    def empty_batch():
        out = client.encode_patch_batch([])
        assert out.shape == (0, feature_dim), f"empty batch returned {out.shape}"

    check("empty_batch", empty_batch)

    def malformed_is_400():
        status, payload = _raw_post(url, wire.ENCODE_MAP_PATH, b"this is not json", timeout_s)
        assert status == 400, f"malformed body got HTTP {status}"
        assert "error" in payload, "400 response missing error field"
        status, payload = _raw_post(
            url, wire.ENCODE_MAP_PATH, json.dumps({"h": 4, "w": 4}).encode(), timeout_s
        )
        assert status == 400, f"missing fields got HTTP {status}"
        assert "error" in payload

    check("malformed_body_is_400", malformed_is_400)

    def shape_violation_is_422():
        body = {"h": 0, "w": 4, "c": 3, "pixels": wire.encode_f32(np.zeros(0, dtype=np.float32))}
        status, payload = _raw_post(url, wire.ENCODE_MAP_PATH, json.dumps(body).encode(), timeout_s)
        assert status == 422, f"zero-height image got HTTP {status}"
        assert "error" in payload, "422 response missing error field"

    check("shape_violation_is_422", shape_violation_is_422)

    return results


def format_results(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        suffix = f"  ({r.detail})" if r.detail else ""
        lines.append(f"[{mark}] {r.name}{suffix}")
    return "\n".join(lines)
