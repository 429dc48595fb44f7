"""Command-line orchestration: one verb per pipeline procedure.

Exit codes: 0 success, 1 usage error, 2 runtime failure. All artifacts land
under the output root in manifests/, images/ and reports/; a run manifest
records the config hash and tool version so any run can be replayed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

import advsmo
from advsmo.blackbox import (
    AttackSample,
    ClassifierEndpoint,
    DefenseKind,
    Reference,
    apply_defense,
    attack_success_rate,
    classify,
    evasion_rate,
    health,
)
from advsmo.config import ENDPOINT_ENV_VAR, PipelineConfig, config_from_dict
from advsmo.errors import AdvsmoError, ConfigError
from advsmo.gabor import gabor_kernel, smooth
from advsmo.image_core import Image, load_image, quantized, save_image, to_luma
from advsmo.search import (
    CandidatePair,
    CandidateRecord,
    CandidateSet,
    GaborDefaults,
    build_initial_set,
    build_manifest,
    image_ref_for,
    intersect,
    manifest_json,
    select_pair,
    valid_set,
)
from advsmo.surrogate import TrainConfig, derive_ssim_band, model_to_json, train
from advsmo.texture import glcm, texture_diff_map


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="advsmo",
                     description="Texture-smoothing black-box adversarial example toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smooth", help="apply one oriented smoothing to an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--k1", type=int, required=True, help="odd kernel side length")
    p.add_argument("--theta", type=float, required=True, help="orientation, degrees")
    p.add_argument("--lambda-factor", type=float, default=0.5)
    p.add_argument("--psi", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--export-kernel", help="also write the kernel as CSV")

    p = sub.add_parser("search", help="grid search and constraint filtering for one image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", help="pipeline config JSON; defaults when omitted")
    p.add_argument("--out", help="output root override")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="override any config value by dotted path, "
                        "e.g. --set thresholds.ssim_hi=0.9")

    p = sub.add_parser("attack", help="full pipeline over a labeled dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", help="dataset root override")
    p.add_argument("--out", help="output root override")
    p.add_argument("--endpoint", help="remote endpoint URL override")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="override any config value by dotted path")
    p.add_argument("--defense", choices=["bilinear", "gaussian", "max", "mean", "median", "min"],
                   help="measure evasion through this defense filter")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--sigma", type=float)
    p.add_argument("--success-mode", choices=["ground-truth", "model-relative"])

    p = sub.add_parser("defend", help="apply one defense filter to an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--defense", required=True,
                   choices=["bilinear", "gaussian", "max", "mean", "median", "min"])
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--sigma", type=float)

    p = sub.add_parser("glcm", help="export a gray-level co-occurrence matrix as CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--offset", default="1,0", help="dx,dy displacement")
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--normalized", action="store_true",
                   help="write probabilities instead of counts")

    p = sub.add_parser("train-surrogate",
                       help="fit the (k1, theta) -> SSIM network from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-loss", help="loss curve CSV (epoch, mse)")
    p.add_argument("--epochs", type=int, default=700)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quantiles", default="0.25,0.75",
                   help="quantile pair for the derived SSIM band")

    p = sub.add_parser("report", help="render heatmaps and CSV tables")
    p.add_argument("--manifest", help="candidate manifest to summarize")
    p.add_argument("--benign", help="benign image for a texture-change heatmap")
    p.add_argument("--adv", help="adversarial image for a texture-change heatmap")
    p.add_argument("--out", required=True, help="output root")
    p.add_argument("--tile", type=int, default=8)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--levels", type=int, default=8)
    return parser


def _write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def _heatmap_png(values: np.ndarray, path: Path, cell: int = 16) -> None:
    """Grayscale heatmap with a fixed (data-independent) value mapping."""
    scaled = np.kron(np.clip(values, 0.0, 1.0), np.ones((cell, cell)))
    h, w = scaled.shape
    pad_h, pad_w = max(0, 8 - h), max(0, 8 - w)
    if pad_h or pad_w:
        scaled = np.pad(scaled, ((0, pad_h), (0, pad_w)))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(Image.from_array(scaled), path)


def _parse_offset(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise _UsageError(f"offset must look like 'dx,dy', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise _UsageError(f"offset must be integers, got {text!r}") from exc


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply dotted-path --set KEY=VALUE pairs onto a raw config document."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # unquoted strings pass through as-is
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise _UsageError(f"--set path {key!r} crosses a non-object value")
        node[parts[-1]] = value
    return doc


def _load_config_for(args) -> PipelineConfig:
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{args.config} is not valid JSON: {exc}") from exc
    else:
        doc = {}
    doc = _apply_overrides(doc, getattr(args, "overrides", []))
    cfg = config_from_dict(doc)
    updates = {}
    if getattr(args, "dataset", None):
        updates["dataset_root"] = args.dataset
    if getattr(args, "out", None):
        updates["output_root"] = args.out
    if getattr(args, "success_mode", None):
        updates["success_mode"] = args.success_mode
    url = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV_VAR)
    if url:
        updates["endpoint"] = ClassifierEndpoint(
            kind="remote", url=url,
            timeout_ms=cfg.endpoint.timeout_ms, max_in_flight=cfg.endpoint.max_in_flight)
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _write_run_manifest(cfg: PipelineConfig, out_root: Path) -> None:
    doc = {"tool_version": advsmo.__version__,
           "config_hash": cfg.config_hash(),
           "config": cfg.to_canonical_dict()}
    path = out_root / "manifests" / "run.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _search_one(cfg: PipelineConfig, image_path: str,
                out_root: Path) -> tuple[list[CandidateRecord], dict, Image]:
    """Evaluate the grid for one image, write candidates plus manifest."""
    benign = load_image(image_path)
    grid = cfg.grid()
    workers = cfg.workers if cfg.workers is not None else os.cpu_count()
    records = build_initial_set(benign, grid, cfg.gabor, workers=workers)
    stem = Path(image_path).stem
    placed = []
    for rec in records:
        if rec.skipped:
            placed.append(rec)
            continue
        ref = image_ref_for(stem, rec.pair)
        target = out_root / ref
        target.parent.mkdir(parents=True, exist_ok=True)
        save_image(rec.image, target)
        placed.append(replace(rec, image_ref=ref))
    sets = valid_set(placed, cfg.thresholds)
    manifest = build_manifest(str(image_path), cfg.gabor, grid, placed, sets,
                              cfg.thresholds, advsmo.__version__)
    man_path = out_root / "manifests" / f"{stem}.json"
    man_path.parent.mkdir(parents=True, exist_ok=True)
    man_path.write_text(manifest_json(manifest), encoding="utf-8")
    return placed, manifest, benign


def _cmd_smooth(args) -> int:
    defaults = GaborDefaults(lambda_factor=args.lambda_factor, psi=args.psi,
                             gamma=args.gamma, bandwidth=args.bandwidth)
    params = defaults.params_for(CandidatePair(k1=args.k1, theta=args.theta))
    img = load_image(args.input)
    out = smooth(img, params)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    save_image(out, args.output)
    if args.export_kernel:
        kern = gabor_kernel(params)
        _write_csv(Path(args.export_kernel),
                   [[repr(float(v)) for v in row] for row in kern.weights])
    return 0


def _cmd_search(args) -> int:
    cfg = _load_config_for(args)
    out_root = Path(cfg.output_root)
    _write_run_manifest(cfg, out_root)
    _search_one(cfg, args.input, out_root)
    return 0


def load_dataset(root: str | os.PathLike) -> list[tuple[str, str, int]]:
    """(sample_id, path, label) triples from labels.json or class subdirectories.

    Subdirectory layout assigns labels by sorted directory name, matching the
    reference classifier's convention.
    """
    root = Path(root)
    labels_file = root / "labels.json"
    samples: list[tuple[str, str, int]] = []
    if labels_file.exists():
        doc = json.loads(labels_file.read_text(encoding="utf-8"))
        for entry in doc["samples"]:
            path = root / entry["path"]
            samples.append((Path(entry["path"]).stem, str(path), int(entry["label"])))
    else:
        class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
        if not class_dirs:
            raise AdvsmoError(f"dataset root {root} has no labels.json and no class directories")
        for label, d in enumerate(class_dirs):
            for png in sorted(d.glob("*.png")):
                samples.append((f"{d.name}_{png.stem}", str(png), label))
    if not samples:
        raise AdvsmoError(f"dataset root {root} contains no samples")
    return samples


def _cmd_attack(args) -> int:
    cfg = _load_config_for(args)
    if not cfg.dataset_root:
        raise _UsageError("attack needs a dataset root (config dataset_root or --dataset)")
    out_root = Path(cfg.output_root)
    _write_run_manifest(cfg, out_root)

    health(cfg.endpoint)  # fail fast on unreachable or non-conformant endpoints
    dataset = load_dataset(cfg.dataset_root)
    per_image: list[tuple[str, list[CandidateRecord], dict, Image, int]] = []
    for sample_id, path, label in dataset:
        records, manifest, benign = _search_one(cfg, path, out_root)
        per_image.append((sample_id, records, manifest, benign, label))

    global_pairs = None
    if cfg.global_u:
        sets = []
        for _, _, manifest, _, _ in per_image:
            pairs = [CandidatePair(k1=int(k), theta=float(t))
                     for k, t in manifest["sets"]["intersection"]]
            sets.append(CandidateSet.of(pairs, "intersection"))
        global_set = intersect(sets) if sets else None
        global_pairs = set(global_set.pairs) if global_set else set()
        gpath = out_root / "manifests" / "global_u.json"
        gpath.write_text(json.dumps(
            {"intersection": [[p.k1, p.theta] for p in sorted(global_pairs)]},
            indent=2) + "\n", encoding="utf-8")

    attack_samples: list[AttackSample] = []
    no_candidate: list[str] = []
    for sample_id, records, manifest, benign, label in per_image:
        pairs = [CandidatePair(k1=int(k), theta=float(t))
                 for k, t in manifest["sets"]["intersection"]]
        if global_pairs is not None:
            pairs = [p for p in pairs if p in global_pairs]
        u = CandidateSet.of(pairs, "intersection")
        if len(u) == 0:
            no_candidate.append(sample_id)
            continue
        pair = select_pair(u, records, cfg.selection)
        record = next(r for r in records if r.pair == pair and not r.skipped)
        adv = quantized(record.image)  # what a saved PNG would carry
        adv_path = out_root / "images" / f"{sample_id}_adv.png"
        adv_path.parent.mkdir(parents=True, exist_ok=True)
        save_image(adv, adv_path)
        attack_samples.append(AttackSample(
            sample_id=sample_id, benign=benign, label=label, adversarial=adv,
            pair=pair, ssim=record.ssim, mse=record.mse, linf=record.linf))

    if not attack_samples:
        raise AdvsmoError("no sample produced a valid candidate set; nothing to attack")

    benign_queries = 0
    if cfg.success_mode == "model-relative":
        relabeled = []
        for s in attack_samples:
            verdict = classify(cfg.endpoint, s.benign, Reference(s.benign, s.label))
            benign_queries += 1
            relabeled.append(replace(s, label=verdict.label))
        attack_samples = relabeled

    if args.defense:
        defense = DefenseKind(kind=args.defense, window=args.window, sigma=args.sigma)
        report = evasion_rate(cfg.endpoint, attack_samples, defense)
    else:
        report = attack_success_rate(cfg.endpoint, attack_samples)

    doc = {"tool_version": advsmo.__version__,
           "config_hash": cfg.config_hash(),
           "success_mode": cfg.success_mode,
           "defense": args.defense,
           "benign_query_count": benign_queries,
           "no_candidate": no_candidate}
    doc.update(report.to_dict())
    rep_dir = out_root / "reports"
    rep_dir.mkdir(parents=True, exist_ok=True)
    (rep_dir / "attack_report.json").write_text(json.dumps(doc, indent=2) + "\n",
                                                encoding="utf-8")
    (rep_dir / "attack_report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(f"ASR {report.asr:.4f} over {report.evaluated} evaluated "
          f"({report.unevaluated} unevaluated, {len(no_candidate)} without candidates)")
    return 0


def _cmd_defend(args) -> int:
    img = load_image(args.input)
    defense = DefenseKind(kind=args.defense, window=args.window, sigma=args.sigma)
    out = apply_defense(img, defense)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    save_image(out, args.output)
    return 0


def _cmd_glcm(args) -> int:
    img = load_image(args.input)
    matrix = glcm(to_luma(img), _parse_offset(args.offset), args.levels)
    if args.normalized:
        rows = [[repr(float(v)) for v in row] for row in matrix.normalized]
    else:
        rows = [[int(v) for v in row] for row in matrix.counts]
    _write_csv(Path(args.output), rows)
    return 0


def _cmd_train_surrogate(args) -> int:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    dataset = [(CandidatePair(k1=int(r["k1"]), theta=float(r["theta"])), float(r["ssim"]))
               for r in doc["records"] if not r.get("skipped")]
    result = train(dataset, TrainConfig(epochs=args.epochs, seed=args.seed))
    out_model = Path(args.out_model)
    out_model.parent.mkdir(parents=True, exist_ok=True)
    out_model.write_text(model_to_json(result.model), encoding="utf-8")
    if args.out_loss:
        _write_csv(Path(args.out_loss),
                   [["epoch", "mse"]] + [[i + 1, repr(v)]
                                         for i, v in enumerate(result.loss_curve)])
    q_lo, q_hi = (float(q) for q in args.quantiles.split(","))
    pairs = [pair for pair, _ in dataset]
    lo, hi = derive_ssim_band(result.model, pairs, (q_lo, q_hi))
    print(f"final mse {result.final_loss:.6g}; derived SSIM band ({lo:.9g}, {hi:.9g})")
    return 0


def _cmd_report(args) -> int:
    out_root = Path(args.out)
    wrote = False
    if args.manifest:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        records = [r for r in doc["records"] if not r.get("skipped")]
        _write_csv(out_root / "reports" / "metrics.csv",
                   [["k1", "theta", "ssim", "mse", "linf", "image_ref"]] +
                   [[r["k1"], f"{r['theta']:g}", repr(r["ssim"]), repr(r["mse"]),
                     repr(r["linf"]), r["image_ref"]] for r in records])
        k1s = sorted({r["k1"] for r in records})
        thetas = sorted({r["theta"] for r in records})
        surface = np.zeros((len(k1s), len(thetas)))
        for r in records:
            surface[k1s.index(r["k1"]), thetas.index(r["theta"])] = r["ssim"]
        _write_csv(out_root / "reports" / "ssim_surface.csv",
                   [["k1\\theta"] + [f"{t:g}" for t in thetas]] +
                   [[k] + [repr(float(surface[i, j])) for j in range(len(thetas))]
                    for i, k in enumerate(k1s)])
        # SSIM lives in [-1, 1]; map to [0, 1] for a fixed grayscale scale
        _heatmap_png((surface + 1.0) / 2.0, out_root / "reports" / "ssim_surface.png")
        wrote = True
    if args.benign and args.adv:
        benign = load_image(args.benign)
        adv = load_image(args.adv)
        diff_map = texture_diff_map(to_luma(benign), to_luma(adv),
                                    tile=args.tile, stride=args.stride,
                                    levels=args.levels)
        _write_csv(out_root / "reports" / "texture_diff.csv",
                   [[repr(float(v)) for v in row] for row in diff_map])
        # texture diff is bounded by 2; map to [0, 1]
        _heatmap_png(diff_map / 2.0, out_root / "reports" / "texture_diff.png", cell=8)
        wrote = True
    if not wrote:
        raise _UsageError("report needs --manifest and/or both --benign and --adv")
    return 0


_COMMANDS = {
    "smooth": _cmd_smooth,
    "search": _cmd_search,
    "attack": _cmd_attack,
    "defend": _cmd_defend,
    "glcm": _cmd_glcm,
    "train-surrogate": _cmd_train_surrogate,
    "report": _cmd_report,
}


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (AdvsmoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
