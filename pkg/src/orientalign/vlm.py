"""Front-view recognition through an external vision-language model endpoint.

The four candidate views are sent in azimuth order [0, 90, 180, 270]; the
model answers with a single token 1/2/3/4/NONE naming the image that shows
the object's front.  The applied correction is the yaw that brings that
azimuth back to zero.
"""

import base64
import io
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .geometry import ViewLabel, yaw_deg_for_label, yaw_for_label
from .meshio import TriMesh
from .render import camera_at_azimuth, render

VLM_VIEW_AZIMUTHS_DEG = (0.0, 90.0, 180.0, 270.0)

# If the front appears at image azimuth a, the front camera currently shows
# the view at -a, and the correction yaw is -a.
_INDEX_TO_LABEL = {
    1: ViewLabel.FRONT,
    2: ViewLabel.RIGHT,
    3: ViewLabel.BACK,
    4: ViewLabel.LEFT,
}

DEFAULT_PROMPT_TEMPLATE = """\
You are given 4 renderings of the same 3D object, taken from 4 horizontal
viewpoints spaced 90 degrees apart (images 1, 2, 3, 4).
Identify which image shows the FRONT view of the object.

Recognition rules:
- Stick-like objects (forks, spoons, pens, spears{category_rules}): the handle
  points away from the viewer and the functional end points toward the viewer
  in the front view.
- Vehicles: the front view shows headlights/windshield facing the viewer.
- Animals and humanoids: the front view shows the face looking at the viewer.
- Objects with handles (mugs, extinguishers, teapots): the handle faces away
  from the viewer in the front view.
If no image clearly shows a front view, say so.

Answer with exactly one of: 1, 2, 3, 4, NONE"""


class VlmError(RuntimeError):
    pass


class VlmTransportError(VlmError):
    pass


class VlmParseError(VlmError):
    pass


@dataclass
class VlmConfig:
    endpoint_url: str
    model_name: str = "gemini-2.0-flash"
    api_key_env: str = "VLM_API_KEY"
    wire_style: str = "chat-completion-json"  # or "gemini-style-json"
    timeout: float = 60.0
    max_retries: int = 2
    backoff_base: float = 0.5
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    category: str = ""

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.wire_style not in ("chat-completion-json", "gemini-style-json"):
            raise ValueError(f"unknown wire style: {self.wire_style}")

    def api_key(self):
        key = os.environ.get(self.api_key_env)
        if not key:
            raise VlmError(f"API key environment variable {self.api_key_env} is not set")
        return key


@dataclass
class VlmVerdict:
    label: ViewLabel
    raw_response: str
    attempts: int
    front_image_index: int = 0  # 1..4, 0 for NONE


_STICK_CATEGORIES = (
    "fork", "spoon", "knife", "pen", "pencil", "spear", "key", "rifle",
    "screwdriver", "toothbrush", "bat", "wrench", "hammer",
)


def build_prompt(config):
    """Instantiate the prompt template; only known placeholders are allowed."""
    template = config.prompt_template
    unknown = set(re.findall(r"\{(\w+)\}", template)) - {"category_rules"}
    if unknown:
        raise VlmError(f"unknown placeholder(s) in prompt template: {sorted(unknown)}")
    cat = config.category.strip().lower()
    if cat and cat in _STICK_CATEGORIES:
        rules = f", and in particular {cat}s"
    elif cat:
        rules = f"; the object is a {cat}"
    else:
        rules = ""
    return template.replace("{category_rules}", rules)


def _encode_png(image_u8):
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image_u8).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _build_request(config, prompt, images_b64):
    if config.wire_style == "chat-completion-json":
        content = [{"type": "text", "text": prompt}]
        for b64 in images_b64:
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{b64}"},
            })
        body = {
            "model": config.model_name,
            "messages": [{"role": "user", "content": content}],
        }
        headers = {"Authorization": f"Bearer {config.api_key()}"}
        return config.endpoint_url, body, headers
    parts = [{"text": prompt}]
    for b64 in images_b64:
        parts.append({"inline_data": {"mime_type": "image/png", "data": b64}})
    body = {"contents": [{"parts": parts}]}
    headers = {"x-goog-api-key": config.api_key()}
    return config.endpoint_url, body, headers


def _extract_text(config, payload):
    try:
        if config.wire_style == "chat-completion-json":
            return payload["choices"][0]["message"]["content"]
        return payload["candidates"][0]["content"]["parts"][0]["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise VlmParseError(f"response payload missing text field: {exc}")


_ANSWER_RE = re.compile(r"^(1|2|3|4|NONE)\b")
_LENIENT_RE = re.compile(r"\b(1|2|3|4|NONE)\b")


def parse_answer(text):
    """Extract the answer token; strict leading-token match first, then a
    lenient first-occurrence scan.  Returns 1..4 or 0 for NONE."""
    stripped = text.strip()
    stripped = re.sub(r"^```[a-z]*\s*|\s*```$", "", stripped).strip()
    m = _ANSWER_RE.match(stripped) or _LENIENT_RE.search(stripped)
    if not m:
        raise VlmParseError(f"cannot parse VLM reply: {text!r}")
    tok = m.group(1)
    return 0 if tok == "NONE" else int(tok)


def recognize_front_view(images, config, session=None):
    """Ask the VLM which of 4 images (azimuths 0/90/180/270) is the front.

    Retries with exponential backoff on transport errors and unparseable
    replies.  The API key is read from the environment and never logged.
    """
    if len(images) != 4:
        raise ValueError("recognize_front_view requires exactly 4 images")
    prompt = build_prompt(config)
    images_b64 = [_encode_png(im) for im in images]
    url, body, headers = _build_request(config, prompt, images_b64)
    post = session.post if session is not None else requests.post

    last_err = None
    attempts = 0
    for attempt in range(config.max_retries + 1):
        attempts = attempt + 1
        if attempt > 0 and config.backoff_base > 0:
            time.sleep(config.backoff_base * 2 ** (attempt - 1))
        try:
            resp = post(url, json=body, headers=headers, timeout=config.timeout)
            resp.raise_for_status()
            text = _extract_text(config, resp.json())
            index = parse_answer(text)
        except (requests.RequestException, ValueError, VlmParseError) as exc:
            last_err = exc
            continue
        label = ViewLabel.NO_FRONT_VIEW if index == 0 else _INDEX_TO_LABEL[index]
        return VlmVerdict(label=label, raw_response=text, attempts=attempts,
                          front_image_index=index)
    if isinstance(last_err, VlmParseError):
        raise VlmParseError(f"unparseable reply after {attempts} attempts: {last_err}")
    raise VlmTransportError(f"VLM request failed after {attempts} attempts: {last_err}")


def render_vlm_views(mesh, resolution=256):
    """The four VLM input renders in azimuth order [0, 90, 180, 270]."""
    views = []
    for az in VLM_VIEW_AZIMUTHS_DEG:
        cam = camera_at_azimuth(az, resolution)
        views.append(render(mesh, cam).color_u8())
    return views


def canonicalize_with_vlm(mesh, config, resolution=256, session=None):
    """Render four views, query the VLM and apply the correcting yaw.

    Returns (mesh, verdict).  A NONE verdict returns the mesh unrotated so
    the caller can exclude the object.
    """
    images = render_vlm_views(mesh, resolution)
    verdict = recognize_front_view(images, config, session=session)
    if verdict.label == ViewLabel.NO_FRONT_VIEW:
        return mesh, verdict
    rot = yaw_for_label(verdict.label)
    return TriMesh(mesh.vertices @ rot.T, mesh.faces, mesh.vertex_colors), verdict


def applied_yaw_deg(verdict):
    if verdict.label == ViewLabel.NO_FRONT_VIEW:
        return None
    return yaw_deg_for_label(verdict.label)
