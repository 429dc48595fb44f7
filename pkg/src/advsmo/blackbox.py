"""Opaque classifier access, attack/evasion rate measurement, and defense filters.

The classifier is reachable only through verdicts: nothing in this module can
express gradient or parameter access. Remote endpoints speak the wire protocol
(POST /classify with a base64 PNG, GET /health); stub endpoints apply a
deterministic rule so the suite runs with no external model.
"""

from __future__ import annotations

import base64
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence
from urllib.parse import urlparse

import numpy as np
import requests
from PIL import Image as PILImage
from scipy import ndimage

from advsmo.errors import (
    AllSamplesUnevaluatedError,
    ClassifierHTTPError,
    ClassifierError,
    ClassifierTimeoutError,
    MalformedResponseError,
    WindowTooLargeError,
)
from advsmo.gabor import convolve_image
from advsmo.image_core import Image, quantize_u8, to_luma
from advsmo.metrics import linf
from advsmo.search import CandidatePair
from advsmo.texture import DEFAULT_LEVELS, DEFAULT_OFFSET, texture_diff

MAX_RETRIES = 3

STUB_RULES = ("threshold-flip", "texture-flip")
DEFENSE_KINDS = ("bilinear", "gaussian", "max", "mean", "median", "min")


@dataclass(frozen=True)
class ClassifierEndpoint:
    """Remote (base URL) or stub (rule id + parameters) classifier access."""

    kind: str                      # "remote" | "stub"
    url: str | None = None
    rule: str | None = None
    params: dict = field(default_factory=dict)
    timeout_ms: int = 5000
    max_in_flight: int = 4
    retry_backoff_s: float = 0.25

    def __post_init__(self):
        if self.kind == "remote":
            parsed = urlparse(self.url or "")
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ValueError(f"remote endpoint needs a well-formed URL, got {self.url!r}")
        elif self.kind == "stub":
            if self.rule not in STUB_RULES:
                raise ValueError(f"unknown stub rule {self.rule!r}, expected one of {STUB_RULES}")
        else:
            raise ValueError(f"endpoint kind must be 'remote' or 'stub', got {self.kind!r}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class Verdict:
    label: int
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scores is not None:
            scores = tuple(float(s) for s in self.scores)
            if any(s < 0.0 for s in scores):
                raise ValueError("scores must be nonnegative")
            if abs(sum(scores) - 1.0) > 1e-6:
                raise ValueError(f"scores must sum to 1 within 1e-6, got {sum(scores)}")
            object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class Reference:
    """Benign context a stub rule needs to decide a verdict."""
    image: Image
    label: int


def png_bytes(img: Image) -> bytes:
    data = quantize_u8(img)
    pil = PILImage.fromarray(data[:, :, 0], mode="L") if img.channels == 1 \
        else PILImage.fromarray(data, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def _stub_verdict(ep: ClassifierEndpoint, img: Image, reference: Reference) -> Verdict:
    classes = int(ep.params.get("classes", 2))
    threshold = float(ep.params.get("threshold", 10.0))
    if ep.rule == "threshold-flip":
        distance = linf(reference.image, img).value
    else:  # texture-flip
        offset = tuple(ep.params.get("offset", DEFAULT_OFFSET))
        levels = int(ep.params.get("levels", DEFAULT_LEVELS))
        distance = texture_diff(to_luma(reference.image), to_luma(img), offset, levels)
    if distance > threshold:
        return Verdict(label=(reference.label + 1) % classes)
    return Verdict(label=reference.label)


def parse_verdict(doc) -> Verdict:
    """Validate a wire-protocol response document into a Verdict."""
    if not isinstance(doc, dict) or "label" not in doc or isinstance(doc["label"], bool) \
            or not isinstance(doc["label"], int):
        raise MalformedResponseError(f"response is not a verdict document: {doc!r}")
    scores = doc.get("scores")
    if scores is not None:
        if not isinstance(scores, list) or not all(isinstance(s, (int, float)) for s in scores):
            raise MalformedResponseError(f"scores field is not a number list: {scores!r}")
        scores = tuple(float(s) for s in scores)
    try:
        return Verdict(label=doc["label"], scores=scores)
    except ValueError as exc:
        raise MalformedResponseError(str(exc)) from exc


def _remote_attempt(ep: ClassifierEndpoint, body: dict) -> Verdict:
    url = ep.url.rstrip("/") + "/classify"
    try:
        resp = requests.post(url, json=body, timeout=ep.timeout_ms / 1000.0)
    except requests.Timeout as exc:
        raise ClassifierTimeoutError(f"{url}: no answer within {ep.timeout_ms} ms") from exc
    except requests.RequestException as exc:
        raise ClassifierHTTPError(f"{url}: {exc}") from exc
    if resp.status_code != 200:
        raise ClassifierHTTPError(f"{url}: HTTP {resp.status_code}")
    try:
        doc = resp.json()
    except ValueError as exc:
        raise MalformedResponseError(f"{url}: body is not JSON") from exc
    return parse_verdict(doc)


def _classify_counted(ep: ClassifierEndpoint, img: Image,
                      reference: Reference | None) -> tuple[Verdict | None, int, ClassifierError | None]:
    """(verdict, attempts, error); retriable failures get MAX_RETRIES retries
    with exponential backoff."""
    if ep.kind == "stub":
        if reference is None:
            raise ValueError("stub endpoints need the benign reference")
        return _stub_verdict(ep, img, reference), 1, None
    body = {"image_png_b64": base64.b64encode(png_bytes(img)).decode("ascii")}
    attempts = 0
    last: ClassifierError | None = None
    for trial in range(1 + MAX_RETRIES):
        attempts += 1
        try:
            return _remote_attempt(ep, body), attempts, None
        except ClassifierError as exc:
            last = exc
            if trial < MAX_RETRIES:
                time.sleep(ep.retry_backoff_s * (2 ** trial))
    return None, attempts, last


def classify(ep: ClassifierEndpoint, img: Image,
             reference: Reference | None = None) -> Verdict:
    """One verdict for one image. Stub endpoints require the benign reference;
    remote endpoints ignore it. Raises the last ClassifierError after the
    retry budget is exhausted."""
    verdict, _, error = _classify_counted(ep, img, reference)
    if verdict is None:
        raise error
    return verdict


def health(ep: ClassifierEndpoint) -> int:
    """Class count behind the endpoint: GET /health for remote, the configured
    parameter for stubs. Single attempt; used as a pre-flight check."""
    if ep.kind == "stub":
        return int(ep.params.get("classes", 2))
    url = ep.url.rstrip("/") + "/health"
    try:
        resp = requests.get(url, timeout=ep.timeout_ms / 1000.0)
    except requests.Timeout as exc:
        raise ClassifierTimeoutError(f"{url}: no answer within {ep.timeout_ms} ms") from exc
    except requests.RequestException as exc:
        raise ClassifierHTTPError(f"{url}: {exc}") from exc
    if resp.status_code != 200:
        raise ClassifierHTTPError(f"{url}: HTTP {resp.status_code}")
    try:
        doc = resp.json()
        classes = doc["classes"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponseError(f"{url}: body is not a health document") from exc
    if isinstance(classes, bool) or not isinstance(classes, int) or classes < 1:
        raise MalformedResponseError(f"{url}: classes field invalid: {classes!r}")
    return classes


@dataclass(frozen=True)
class AttackSample:
    sample_id: str
    benign: Image
    label: int
    adversarial: Image
    pair: CandidatePair | None = None
    ssim: float | None = None
    mse: float | None = None
    linf: float | None = None


@dataclass(frozen=True)
class SampleOutcome:
    sample_id: str
    y: int
    y_hat: int | None
    success: bool | None     # None when unevaluated
    evaluated: bool
    pair: CandidatePair | None = None
    ssim: float | None = None
    mse: float | None = None
    linf: float | None = None


@dataclass(frozen=True)
class AttackReport:
    entries: tuple[SampleOutcome, ...]
    asr: float
    evaluated: int
    unevaluated: int
    query_count: int

    def to_dict(self) -> dict:
        rows = []
        for e in self.entries:
            rows.append({
                "sample_id": e.sample_id, "y": e.y, "y_hat": e.y_hat,
                "success": e.success,
                "k1": e.pair.k1 if e.pair else None,
                "theta": e.pair.theta if e.pair else None,
                "ssim": e.ssim, "mse": e.mse, "linf": e.linf,
            })
        return {"entries": rows, "asr": self.asr, "evaluated": self.evaluated,
                "unevaluated": self.unevaluated, "query_count": self.query_count}

    def to_csv(self) -> str:
        lines = ["sample_id,y,y_hat,success,k1,theta,ssim,mse,linf"]
        for e in self.entries:
            cells = [e.sample_id, e.y,
                     "" if e.y_hat is None else e.y_hat,
                     "" if e.success is None else str(e.success).lower(),
                     e.pair.k1 if e.pair else "",
                     f"{e.pair.theta:g}" if e.pair else "",
                     "" if e.ssim is None else repr(e.ssim),
                     "" if e.mse is None else repr(e.mse),
                     "" if e.linf is None else repr(e.linf)]
            lines.append(",".join(str(c) for c in cells))
        return "\n".join(lines) + "\n"


def _measure(ep: ClassifierEndpoint, samples: Sequence[AttackSample],
             image_of: Callable[[AttackSample], Image]) -> AttackReport:
    if not samples:
        raise ValueError("need at least one sample")

    def run_one(sample: AttackSample):
        return _classify_counted(ep, image_of(sample),
                                 Reference(sample.benign, sample.label))

    if ep.kind == "remote" and ep.max_in_flight > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=ep.max_in_flight) as pool:
            results = list(pool.map(run_one, samples))
    else:
        results = [run_one(s) for s in samples]

    entries = []
    successes = evaluated = unevaluated = queries = 0
    for sample, (verdict, attempts, _) in zip(samples, results):
        queries += attempts
        if verdict is None:
            unevaluated += 1
            entries.append(SampleOutcome(sample.sample_id, sample.label, None, None,
                                         evaluated=False, pair=sample.pair,
                                         ssim=sample.ssim, mse=sample.mse, linf=sample.linf))
            continue
        evaluated += 1
        success = verdict.label != sample.label
        successes += int(success)
        entries.append(SampleOutcome(sample.sample_id, sample.label, verdict.label, success,
                                     evaluated=True, pair=sample.pair,
                                     ssim=sample.ssim, mse=sample.mse, linf=sample.linf))
    if evaluated == 0:
        raise AllSamplesUnevaluatedError(f"all {len(samples)} samples failed evaluation")
    return AttackReport(entries=tuple(entries), asr=successes / evaluated,
                        evaluated=evaluated, unevaluated=unevaluated, query_count=queries)


def attack_success_rate(ep: ClassifierEndpoint,
                        samples: Sequence[AttackSample]) -> AttackReport:
    """Fraction of evaluated samples the classifier labels differently from y.
    Unevaluated samples are excluded from the rate and counted separately."""
    return _measure(ep, samples, lambda s: s.adversarial)


@dataclass(frozen=True)
class DefenseKind:
    kind: str                  # bilinear | gaussian | max | mean | median | min
    window: int = 3            # odd; ignored by bilinear
    sigma: float | None = None  # gaussian only

    def __post_init__(self):
        if self.kind not in DEFENSE_KINDS:
            raise ValueError(f"unknown defense {self.kind!r}, expected one of {DEFENSE_KINDS}")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be an odd integer >= 3, got {self.window}")


def _gaussian_weights(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    if sigma <= 0.0:
        weights = np.zeros((window, window))
        weights[half, half] = 1.0
        return weights
    weights = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _resize_bilinear(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize with pixel-center alignment and edge clamp.

    Interpolation uses c0 + f * (c1 - c0), which keeps constant planes
    bit-exact."""
    in_h, in_w = plane.shape

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        lo = np.clip(np.floor(pos), 0, n_in - 1).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = np.clip(pos - lo, 0.0, 1.0)
        return lo, hi, frac

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)
    rows = plane[y0, :] + fy[:, None] * (plane[y1, :] - plane[y0, :])
    return rows[:, x0] + fx[None, :] * (rows[:, x1] - rows[:, x0])


def _bilinear_resample(img: Image) -> Image:
    half_w = max(1, (img.width + 1) // 2)
    half_h = max(1, (img.height + 1) // 2)
    out = np.empty_like(img.pixels)
    for ch in range(img.channels):
        down = _resize_bilinear(img.pixels[:, :, ch], half_h, half_w)
        out[:, :, ch] = _resize_bilinear(down, img.height, img.width)
    return Image.from_array(np.clip(out, 0.0, 1.0))


def apply_defense(img: Image, d: DefenseKind) -> Image:
    """Per-channel windowed purification filter with reflect padding.

    mean/median/min/max are window statistics; gaussian uses a normalized
    windowed kernel; bilinear is a down-by-2 then up-by-2 resample.
    """
    if d.kind == "bilinear":
        return _bilinear_resample(img)
    if d.window > min(img.width, img.height):
        raise WindowTooLargeError(
            f"window {d.window} exceeds image {img.width}x{img.height}")
    if d.kind == "mean":
        weights = np.full((d.window, d.window), 1.0 / (d.window * d.window))
        return convolve_image(img, weights)
    if d.kind == "gaussian":
        sigma = d.sigma if d.sigma is not None else d.window / 4.0
        return convolve_image(img, _gaussian_weights(d.window, sigma))
    filters = {"median": ndimage.median_filter,
               "min": ndimage.minimum_filter,
               "max": ndimage.maximum_filter}
    fn = filters[d.kind]
    out = np.empty_like(img.pixels)
    for ch in range(img.channels):
        out[:, :, ch] = fn(img.pixels[:, :, ch], size=d.window, mode="reflect")
    return Image.from_array(np.clip(out, 0.0, 1.0))


def evasion_rate(ep: ClassifierEndpoint, samples: Sequence[AttackSample],
                 d: DefenseKind) -> AttackReport:
    """Attack success rate measured after the defense filter purifies each
    adversarial image. Success still means a label different from y."""
    return _measure(ep, samples, lambda s: apply_defense(s.adversarial, d))
