"""Candidate grid generation and the perceptibility/attack constraint system.

A candidate is a (kernel scale, orientation) pair. Each pair smooths the
benign image once; candidates whose SSIM/MSE/L-infinity distances fall
strictly inside the configured bands form the per-metric sets, and their
intersection is the final valid set.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from advsmo.errors import EmptySetError, GridRangeError, KernelTooLargeError
from advsmo.gabor import GaborParams, sigma_for_wavelength, smooth
from advsmo.image_core import Image
from advsmo.metrics import MetricKind, linf, mse, ssim

THETA_MAX = 90.0  # smoothing responses repeat mirrored beyond 90 degrees


@dataclass(frozen=True, order=True)
class CandidatePair:
    k1: int       # odd kernel side length
    theta: float  # orientation, degrees

    def __post_init__(self):
        if self.k1 < 3 or self.k1 % 2 == 0:
            raise ValueError(f"k1 must be an odd integer >= 3, got {self.k1}")


@dataclass(frozen=True)
class GaborDefaults:
    """How a candidate pair expands to full kernel parameters."""

    lambda_factor: float = 0.5   # wavelength = lambda_factor * k1
    psi: float = 0.0
    gamma: float = 0.5
    bandwidth: float = 1.0       # octaves; sets envelope width from wavelength

    def params_for(self, pair: CandidatePair) -> GaborParams:
        wavelength = self.lambda_factor * pair.k1
        return GaborParams(
            wavelength=wavelength,
            psi=self.psi,
            gamma=self.gamma,
            sigma=sigma_for_wavelength(wavelength, self.bandwidth),
            theta=pair.theta,
            kernel_scale=pair.k1,
        )

    def to_dict(self) -> dict:
        return {"lambda_factor": self.lambda_factor, "psi": self.psi,
                "gamma": self.gamma, "bandwidth": self.bandwidth}


@dataclass(frozen=True)
class ConstraintThresholds:
    """Strict (lo, hi) bands per metric. Defaults ship the published calibration
    values verbatim; every value is configurable."""

    ssim_lo: float = 0.077444225
    ssim_hi: float = 0.132868965
    mse_lo: float = 0.020213895
    mse_hi: float = 0.038001586
    linf_lo: float = 19.81960784
    linf_hi: float = 27.19215686

    def __post_init__(self):
        for name in ("ssim", "mse", "linf"):
            lo = getattr(self, f"{name}_lo")
            hi = getattr(self, f"{name}_hi")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} bounds must be finite")
            if not lo < hi:
                raise ValueError(f"{name} bounds need lo < hi, got ({lo}, {hi})")

    def band(self, kind: MetricKind) -> tuple[float, float]:
        name = kind.value
        return getattr(self, f"{name}_lo"), getattr(self, f"{name}_hi")

    def to_dict(self) -> dict:
        return {"ssim_lo": self.ssim_lo, "ssim_hi": self.ssim_hi,
                "mse_lo": self.mse_lo, "mse_hi": self.mse_hi,
                "linf_lo": self.linf_lo, "linf_hi": self.linf_hi}


@dataclass(frozen=True)
class CandidateRecord:
    """One grid point evaluated against a benign image."""

    pair: CandidatePair
    ssim: float | None
    mse: float | None
    linf: float | None
    image: Image | None = field(repr=False, default=None)
    image_ref: str | None = None
    skipped: bool = False
    skip_reason: str | None = None


@dataclass(frozen=True)
class CandidateSet:
    """Deduplicated pairs in deterministic ascending order, tagged with the
    filter that produced them."""

    pairs: tuple[CandidatePair, ...]
    provenance: str

    @classmethod
    def of(cls, pairs: Iterable[CandidatePair], provenance: str) -> "CandidateSet":
        return cls(pairs=tuple(sorted(set(pairs))), provenance=provenance)

    def __contains__(self, pair: CandidatePair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def generate_grid(k1_values: Iterable[int], theta_step: float) -> list[CandidatePair]:
    """Cartesian product of odd kernel scales with theta in {0, step, ..., 90},
    ascending order. theta_step must divide 90."""
    k1s = sorted(set(int(k) for k in k1_values))
    if not k1s:
        raise GridRangeError("k1 range is empty")
    for k in k1s:
        if k < 3 or k % 2 == 0:
            raise GridRangeError(f"k1 values must be odd integers >= 3, got {k}")
    if not (theta_step > 0.0) or not math.isfinite(theta_step):
        raise GridRangeError(f"theta_step must be positive and finite, got {theta_step}")
    steps = THETA_MAX / theta_step
    if abs(steps - round(steps)) > 1e-9:
        raise GridRangeError(f"theta_step {theta_step} does not divide {THETA_MAX}")
    thetas = [i * theta_step for i in range(int(round(steps)) + 1)]
    return [CandidatePair(k1=k, theta=t) for k in k1s for t in thetas]


DEFAULT_GRID_K1 = (3, 5, 7, 9, 11, 13, 15)
DEFAULT_THETA_STEP = 5.0


def default_grid() -> list[CandidatePair]:
    return generate_grid(DEFAULT_GRID_K1, DEFAULT_THETA_STEP)


def _evaluate_pair(benign: Image, pair: CandidatePair,
                   defaults: GaborDefaults) -> CandidateRecord:
    try:
        candidate = smooth(benign, defaults.params_for(pair))
    except KernelTooLargeError as exc:
        return CandidateRecord(pair=pair, ssim=None, mse=None, linf=None,
                               skipped=True, skip_reason=str(exc))
    return CandidateRecord(
        pair=pair,
        ssim=ssim(benign, candidate).value,
        mse=mse(benign, candidate).value,
        linf=linf(benign, candidate).value,
        image=candidate,
    )


def build_initial_set(benign: Image, grid: Sequence[CandidatePair],
                      defaults: GaborDefaults | None = None,
                      workers: int | None = None) -> list[CandidateRecord]:
    """One record per grid pair, in grid order. Pairs whose kernel exceeds the
    image are skipped (recorded, not fatal). Results are worker-count independent."""
    defaults = defaults or GaborDefaults()
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: _evaluate_pair(benign, p, defaults), grid))
    return [_evaluate_pair(benign, pair, defaults) for pair in grid]


def filter_by_metric(records: Sequence[CandidateRecord], kind: MetricKind,
                     lo: float, hi: float) -> CandidateSet:
    """Pairs whose metric lies strictly inside (lo, hi). Skipped records never pass."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    kept = []
    for rec in records:
        if rec.skipped:
            continue
        value = getattr(rec, kind.value)
        if lo < value < hi:
            kept.append(rec.pair)
    return CandidateSet.of(kept, provenance=kind.value)


def intersect(sets: Sequence[CandidateSet]) -> CandidateSet:
    """Pairs present in every input set."""
    if not sets:
        raise ValueError("need at least one set to intersect")
    common = set(sets[0].pairs)
    for s in sets[1:]:
        common &= set(s.pairs)
    return CandidateSet.of(common, provenance="intersection")


def valid_set(records: Sequence[CandidateRecord],
              thresholds: ConstraintThresholds) -> dict[str, CandidateSet]:
    """All three per-metric sets plus their intersection, keyed by provenance."""
    sets = {
        kind.value: filter_by_metric(records, kind, *thresholds.band(kind))
        for kind in (MetricKind.SSIM, MetricKind.MSE, MetricKind.LINF)
    }
    sets["intersection"] = intersect([sets["ssim"], sets["mse"], sets["linf"]])
    return sets


def select_pair(u: CandidateSet, records: Sequence[CandidateRecord],
                policy: str = "least-perceptible") -> CandidatePair:
    """Pick one pair from the valid set.

    least-perceptible: maximal SSIM, ties broken by smaller k1 then smaller theta.
    first: the earliest member in record (grid) order.
    """
    if len(u) == 0:
        raise EmptySetError("cannot select from an empty candidate set")
    if policy == "first":
        for rec in records:
            if not rec.skipped and rec.pair in u:
                return rec.pair
        raise EmptySetError("no record matches the candidate set")
    if policy != "least-perceptible":
        raise ValueError(f"unknown selection policy: {policy}")
    by_pair = {rec.pair: rec for rec in records if not rec.skipped}
    best = None
    for pair in u.pairs:
        rec = by_pair.get(pair)
        if rec is None:
            continue
        key = (-rec.ssim, pair.k1, pair.theta)
        if best is None or key < best[0]:
            best = (key, pair)
    if best is None:
        raise EmptySetError("no record matches the candidate set")
    return best[1]


def _fmt_theta(theta: float) -> str:
    return f"{theta:g}"


def image_ref_for(stem: str, pair: CandidatePair) -> str:
    """Deterministic storage key for a candidate image."""
    return f"images/{stem}/k{pair.k1}_t{_fmt_theta(pair.theta)}.png"


def build_manifest(benign_path: str, defaults: GaborDefaults,
                   grid: Sequence[CandidatePair], records: Sequence[CandidateRecord],
                   sets: dict[str, CandidateSet], thresholds: ConstraintThresholds,
                   tool_version: str) -> dict:
    """Candidate manifest with fixed field names and ordering for byte-determinism."""
    rec_rows = []
    for rec in records:
        row = {"k1": rec.pair.k1, "theta": rec.pair.theta,
               "ssim": rec.ssim, "mse": rec.mse, "linf": rec.linf,
               "image_ref": rec.image_ref}
        if rec.skipped:
            row["skipped"] = True
            row["skip_reason"] = rec.skip_reason
        rec_rows.append(row)
    return {
        "benign_path": benign_path,
        "gabor_defaults": defaults.to_dict(),
        "grid": [[p.k1, p.theta] for p in grid],
        "records": rec_rows,
        "sets": {name: [[p.k1, p.theta] for p in sets[name].pairs]
                 for name in ("ssim", "mse", "linf", "intersection")},
        "thresholds": thresholds.to_dict(),
        "tool_version": tool_version,
    }


def manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2) + "\n"
