import numpy as np
import pytest

from orientalign.geometry import ViewLabel, yaw_rotation
from orientalign.render import camera_at_azimuth, render
from orientalign.vlm import (
    VLM_VIEW_AZIMUTHS_DEG,
    VlmConfig,
    VlmError,
    VlmParseError,
    VlmTransportError,
    applied_yaw_deg,
    build_prompt,
    canonicalize_with_vlm,
    parse_answer,
    recognize_front_view,
    render_vlm_views,
    _build_request,
)

from conftest import asymmetric_mesh, decode_png_b64


def _config(url, **kw):
    kw.setdefault("backoff_base", 0.0)
    return VlmConfig(endpoint_url=url, **kw)


def _blank_images():
    return [np.full((64, 64, 3), 255, dtype=np.uint8) for _ in range(4)]


class TestParseAnswer:
    @pytest.mark.parametrize("text,expected", [
        ("1", 1), ("2", 2), ("3", 3), ("4", 4), ("NONE", 0),
        ("  3  ", 3), ("3.", 3), ("NONE - no clear front", 0),
        ("```\n2\n```", 2), ("The answer is 4", 4),
    ])
    def test_valid(self, text, expected):
        assert parse_answer(text) == expected

    @pytest.mark.parametrize("text", ["", "5", "maybe", "image A", "0"])
    def test_invalid(self, text):
        with pytest.raises(VlmParseError):
            parse_answer(text)


class TestPrompt:
    def test_default_mentions_answer_tokens(self):
        p = build_prompt(_config("http://x"))
        assert "1, 2, 3, 4, NONE" in p
        assert "{" not in p

    def test_category_injection(self):
        p = build_prompt(_config("http://x", category="fork"))
        assert "fork" in p

    def test_unknown_placeholder_rejected(self):
        cfg = _config("http://x", prompt_template="hello {bogus}")
        with pytest.raises(VlmError):
            build_prompt(cfg)

    def test_override_template(self):
        cfg = _config("http://x", prompt_template="just answer")
        assert build_prompt(cfg) == "just answer"


class TestConfig:
    def test_rejects_bad_wire_style(self):
        with pytest.raises(ValueError):
            VlmConfig(endpoint_url="http://x", wire_style="soap")

    def test_rejects_negative_retries(self):
        with pytest.raises(ValueError):
            VlmConfig(endpoint_url="http://x", max_retries=-1)

    def test_missing_api_key(self, monkeypatch):
        monkeypatch.delenv("VLM_API_KEY", raising=False)
        cfg = _config("http://x")
        with pytest.raises(VlmError):
            cfg.api_key()


class TestRequestShapes:
    def test_chat_completion_body(self):
        cfg = _config("http://x/v1")
        url, body, headers = _build_request(cfg, "prompt", ["aaa", "bbb"])
        assert url == "http://x/v1"
        assert headers["Authorization"] == "Bearer test-key-not-a-secret"
        content = body["messages"][0]["content"]
        assert content[0] == {"type": "text", "text": "prompt"}
        assert [c["type"] for c in content[1:]] == ["image_url", "image_url"]
        assert content[1]["image_url"]["url"].startswith("data:image/png;base64,")

    def test_gemini_style_body(self):
        cfg = _config("http://x/g", wire_style="gemini-style-json")
        url, body, headers = _build_request(cfg, "prompt", ["aaa"])
        assert headers["x-goog-api-key"] == "test-key-not-a-secret"
        parts = body["contents"][0]["parts"]
        assert parts[0] == {"text": "prompt"}
        assert parts[1]["inline_data"]["mime_type"] == "image/png"
        assert parts[1]["inline_data"]["data"] == "aaa"

    def test_api_key_not_in_body(self):
        cfg = _config("http://x")
        _, body, _ = _build_request(cfg, "prompt", ["aaa"])
        import json

        assert "test-key-not-a-secret" not in json.dumps(body)


class TestRecognize:
    def test_requires_four_images(self, mock_vlm):
        srv = mock_vlm(replies=["1"])
        with pytest.raises(ValueError):
            recognize_front_view(_blank_images()[:3], _config(srv.url))

    @pytest.mark.parametrize("reply,label", [
        ("1", ViewLabel.FRONT),
        ("2", ViewLabel.RIGHT),
        ("3", ViewLabel.BACK),
        ("4", ViewLabel.LEFT),
        ("NONE", ViewLabel.NO_FRONT_VIEW),
    ])
    def test_index_to_label(self, mock_vlm, reply, label):
        srv = mock_vlm(replies=[reply])
        verdict = recognize_front_view(_blank_images(), _config(srv.url))
        assert verdict.label == label
        assert verdict.attempts == 1

    def test_retry_on_malformed_then_success(self, mock_vlm):
        srv = mock_vlm(replies=["hard to say", "2"])
        verdict = recognize_front_view(_blank_images(), _config(srv.url))
        assert verdict.label == ViewLabel.RIGHT
        assert verdict.attempts == 2
        assert srv.request_count == 2

    def test_retry_on_http_500(self, mock_vlm):
        srv = mock_vlm(replies=["__http_500__", "1"])
        verdict = recognize_front_view(_blank_images(), _config(srv.url))
        assert verdict.label == ViewLabel.FRONT
        assert srv.request_count == 2

    def test_exhausted_retries_parse_error(self, mock_vlm):
        srv = mock_vlm(replies=["?", "?", "?"])
        with pytest.raises(VlmParseError):
            recognize_front_view(_blank_images(), _config(srv.url, max_retries=2))
        assert srv.request_count == 3

    def test_exhausted_retries_transport_error(self, mock_vlm):
        srv = mock_vlm(replies=["__http_500__"] * 3)
        with pytest.raises(VlmTransportError):
            recognize_front_view(_blank_images(), _config(srv.url, max_retries=2))

    def test_unreachable_endpoint(self):
        cfg = _config("http://127.0.0.1:1/unreachable", max_retries=0, timeout=1.0)
        with pytest.raises(VlmTransportError):
            recognize_front_view(_blank_images(), cfg)

    def test_images_transmitted_in_azimuth_order(self, mock_vlm):
        mesh = asymmetric_mesh(0)
        srv = mock_vlm(replies=["1"])
        images = render_vlm_views(mesh, resolution=64)
        recognize_front_view(images, _config(srv.url))
        from conftest import _images_from_chat_body

        received = _images_from_chat_body(srv.bodies[0])
        assert len(received) == 4
        for sent, got in zip(images, received):
            np.testing.assert_array_equal(sent, got)


def _pixel_match_oracle(reference):
    """Answer with the image closest to the reference render; tolerate a few
    off-by-one pixels from float noise in the rotated geometry."""
    def oracle(images):
        diffs = [np.abs(img.astype(int) - reference.astype(int)).mean()
                 for img in images]
        best = int(np.argmin(diffs))
        return str(best + 1) if diffs[best] < 1.0 else "NONE"
    return oracle


class TestCanonicalize:
    def test_render_views_match_rig(self):
        mesh = asymmetric_mesh(1)
        views = render_vlm_views(mesh, resolution=64)
        for az, img in zip(VLM_VIEW_AZIMUTHS_DEG, views):
            expected = render(mesh, camera_at_azimuth(az, 64)).color_u8()
            np.testing.assert_array_equal(img, expected)

    @pytest.mark.parametrize("reply,yaw_deg", [
        ("1", 0.0), ("2", -90.0), ("3", 180.0), ("4", 90.0),
    ])
    def test_applied_yaw(self, mock_vlm, reply, yaw_deg):
        mesh = asymmetric_mesh(2)
        srv = mock_vlm(replies=[reply])
        out, verdict = canonicalize_with_vlm(mesh, _config(srv.url), resolution=64)
        assert applied_yaw_deg(verdict) == yaw_deg
        rot = yaw_rotation(np.deg2rad(yaw_deg))
        np.testing.assert_allclose(out.vertices, mesh.vertices @ rot.T, atol=1e-12)

    def test_none_returns_unrotated(self, mock_vlm):
        mesh = asymmetric_mesh(3)
        srv = mock_vlm(replies=["NONE"])
        out, verdict = canonicalize_with_vlm(mesh, _config(srv.url), resolution=64)
        assert verdict.label == ViewLabel.NO_FRONT_VIEW
        assert applied_yaw_deg(verdict) is None
        np.testing.assert_array_equal(out.vertices, mesh.vertices)

    def test_closed_loop_with_pixel_matching_oracle(self, mock_vlm):
        """An oracle that pixel-matches against the true front render must
        drive any pre-rotated mesh back to canonical orientation."""
        mesh = asymmetric_mesh(4)
        reference = render(mesh, camera_at_azimuth(0.0, 64)).color_u8()
        oracle = _pixel_match_oracle(reference)

        for start_yaw in (0.0, 90.0, 180.0, 270.0):
            srv = mock_vlm(answer_fn=oracle)
            rotated = mesh.transformed(rotation=yaw_rotation(np.deg2rad(start_yaw)))
            out, verdict = canonicalize_with_vlm(
                rotated, _config(srv.url), resolution=64)
            assert verdict.label != ViewLabel.NO_FRONT_VIEW
            np.testing.assert_allclose(out.vertices, mesh.vertices, atol=1e-9)

    def test_idempotent_after_canonicalization(self, mock_vlm):
        mesh = asymmetric_mesh(5)
        reference = render(mesh, camera_at_azimuth(0.0, 64)).color_u8()
        srv = mock_vlm(answer_fn=_pixel_match_oracle(reference))
        rotated = mesh.transformed(rotation=yaw_rotation(np.pi / 2))
        once, _ = canonicalize_with_vlm(rotated, _config(srv.url), resolution=64)
        twice, verdict = canonicalize_with_vlm(once, _config(srv.url), resolution=64)
        assert verdict.label == ViewLabel.FRONT
        np.testing.assert_allclose(twice.vertices, once.vertices, atol=1e-12)
