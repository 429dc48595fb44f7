"""Pipeline configuration: one JSON document drives a reproducible run.

Every value has a shipped default; the thresholds default to the published
calibration constants. Validation happens at load time and names the
offending key.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from advsmo.blackbox import ClassifierEndpoint
from advsmo.errors import ConfigError, GridRangeError
from advsmo.search import (
    DEFAULT_GRID_K1,
    DEFAULT_THETA_STEP,
    ConstraintThresholds,
    GaborDefaults,
    generate_grid,
)

SELECTION_POLICIES = ("least-perceptible", "first")
SUCCESS_MODES = ("ground-truth", "model-relative")
ENDPOINT_ENV_VAR = "ADVSMO_ENDPOINT"


def default_endpoint() -> ClassifierEndpoint:
    return ClassifierEndpoint(kind="stub", rule="threshold-flip",
                              params={"threshold": 10.0, "classes": 2})


@dataclass(frozen=True)
class PipelineConfig:
    gabor: GaborDefaults = field(default_factory=GaborDefaults)
    grid_k1: tuple[int, ...] = DEFAULT_GRID_K1
    theta_step: float = DEFAULT_THETA_STEP
    thresholds: ConstraintThresholds = field(default_factory=ConstraintThresholds)
    selection: str = "least-perceptible"
    endpoint: ClassifierEndpoint = field(default_factory=default_endpoint)
    dataset_root: str | None = None
    output_root: str = "out"
    seed: int = 0
    workers: int | None = None
    success_mode: str = "ground-truth"
    global_u: bool = False

    def grid(self):
        return generate_grid(self.grid_k1, self.theta_step)

    def to_canonical_dict(self) -> dict:
        ep: dict = {"kind": self.endpoint.kind}
        if self.endpoint.kind == "remote":
            ep["url"] = self.endpoint.url
        else:
            ep["rule"] = self.endpoint.rule
            ep["params"] = {k: self.endpoint.params[k] for k in sorted(self.endpoint.params)}
        ep["timeout_ms"] = self.endpoint.timeout_ms
        ep["max_in_flight"] = self.endpoint.max_in_flight
        return {
            "gabor": self.gabor.to_dict(),
            "grid": {"k1": list(self.grid_k1), "theta_step": self.theta_step},
            "thresholds": self.thresholds.to_dict(),
            "selection": self.selection,
            "endpoint": ep,
            "dataset_root": self.dataset_root,
            "output_root": self.output_root,
            "seed": self.seed,
            "workers": self.workers,
            "success_mode": self.success_mode,
            "global_u": self.global_u,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_canonical_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _expect(doc: dict, key: str, types, default):
    value = doc.get(key, default)
    if value is not None and not isinstance(value, types):
        raise ConfigError(key, f"expected {types}, got {type(value).__name__}")
    return value


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")

    gabor_doc = _expect(doc, "gabor", dict, {}) or {}
    try:
        gabor = GaborDefaults(
            lambda_factor=float(gabor_doc.get("lambda_factor", 0.5)),
            psi=float(gabor_doc.get("psi", 0.0)),
            gamma=float(gabor_doc.get("gamma", 0.5)),
            bandwidth=float(gabor_doc.get("bandwidth", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("gabor", str(exc)) from exc
    if gabor.lambda_factor <= 0:
        raise ConfigError("gabor.lambda_factor", "must be > 0")
    if gabor.gamma <= 0:
        raise ConfigError("gabor.gamma", "must be > 0")

    grid_doc = _expect(doc, "grid", dict, {}) or {}
    k1_values = grid_doc.get("k1", list(DEFAULT_GRID_K1))
    theta_step = grid_doc.get("theta_step", DEFAULT_THETA_STEP)
    try:
        grid_k1 = tuple(int(k) for k in k1_values)
        generate_grid(grid_k1, float(theta_step))
    except (TypeError, ValueError, GridRangeError) as exc:
        raise ConfigError("grid", str(exc)) from exc

    thr_doc = _expect(doc, "thresholds", dict, {}) or {}
    try:
        thresholds = ConstraintThresholds(**{k: float(v) for k, v in thr_doc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError("thresholds", str(exc)) from exc

    selection = _expect(doc, "selection", str, "least-perceptible")
    if selection not in SELECTION_POLICIES:
        raise ConfigError("selection", f"must be one of {SELECTION_POLICIES}")

    ep_doc = _expect(doc, "endpoint", dict, None)
    if ep_doc is None:
        endpoint = default_endpoint()
    else:
        try:
            endpoint = ClassifierEndpoint(
                kind=ep_doc.get("kind", "stub"),
                url=ep_doc.get("url"),
                rule=ep_doc.get("rule", "threshold-flip" if ep_doc.get("kind", "stub") == "stub" else None),
                params=ep_doc.get("params", {}),
                timeout_ms=int(ep_doc.get("timeout_ms", 5000)),
                max_in_flight=int(ep_doc.get("max_in_flight", 4)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("endpoint", str(exc)) from exc

    success_mode = _expect(doc, "success_mode", str, "ground-truth")
    if success_mode not in SUCCESS_MODES:
        raise ConfigError("success_mode", f"must be one of {SUCCESS_MODES}")

    workers = _expect(doc, "workers", int, None)
    if workers is not None and workers < 1:
        raise ConfigError("workers", "must be >= 1")

    return PipelineConfig(
        gabor=gabor,
        grid_k1=grid_k1,
        theta_step=float(theta_step),
        thresholds=thresholds,
        selection=selection,
        endpoint=endpoint,
        dataset_root=_expect(doc, "dataset_root", str, None),
        output_root=_expect(doc, "output_root", str, "out"),
        seed=_expect(doc, "seed", int, 0),
        workers=workers,
        success_mode=success_mode,
        global_u=bool(_expect(doc, "global_u", bool, False)),
    )


def load_config(path: str | os.PathLike) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
