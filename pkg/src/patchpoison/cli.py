"""Command-line interface for the PatchPoison toolkit."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Iterable

from patchpoison.core.config import FeatureConfig, RansacConfig
from patchpoison.core.errors import InvalidParameterError, PatchPoisonError, parse_model
from patchpoison.core.perturb import PERTURBATION_MAP, Perturbation, build_perturbation
from patchpoison.core.poison import poison_dataset
from patchpoison.core.registry import BASELINE_PRESETS, PATTERN_MAP
from patchpoison.dataset.loader import load_scene
from patchpoison.dataset.writer import write_outputs
from patchpoison.schemas.manifest import PerturbationEntry, PerturbationManifest
from patchpoison.schemas.patch import BackgroundPolicy, Corner, PatchSpec
from patchpoison.schemas.report import Direction
from patchpoison.schemas.sweep import SweepConfig
from patchpoison.services.diagnosis import DiagnoseOptions, diagnose_directory
from patchpoison.services.evaluation import evaluate_directories, format_table, write_report
from patchpoison.services.sweep import run_sweep
from patchpoison.settings import Settings, get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAILURE, f"{self.prog}: error: {message}\n")


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _background(value: str | None) -> BackgroundPolicy | None:
    return BackgroundPolicy(value) if value else None


def cmd_poison(args: argparse.Namespace) -> int:
    spec = parse_model(
        PatchSpec,
        {
            "kind": args.pattern,
            "size_px": args.size,
            "block_px": args.block,
            "alpha": args.alpha,
            "bright_level": args.contrast,
            "dark_level": args.dark,
            "corner": args.corner,
            "margin_px": args.margin,
            "size_fraction": args.size_fraction,
        },
    )
    dataset = load_scene(args.input, _background(args.background))
    manifest = poison_dataset(
        dataset.paths,
        spec,
        args.ratio,
        args.seed,
        args.output,
        root=dataset.root,
        background=dataset.background,
        workers=args.workers,
        notes=dataset.warnings,
    )
    print(Path(args.output) / "poison_manifest.json")
    return EXIT_PARTIAL if manifest.failed_count else EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = evaluate_directories(
        args.poisoned,
        args.original,
        direction=Direction(args.direction),
        background=_background(args.background),
        lpips_path=args.lpips,
        workers=args.workers,
    )
    path = write_report(report, args.output)
    print(format_table(report))
    print(path)
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    options = DiagnoseOptions(
        pairs=args.pairs,
        ground_truth_path=Path(args.gt) if args.gt else None,
        manifest_path=Path(args.manifest) if args.manifest else None,
        dump_features=args.dump_features,
        background=_background(args.background),
        feature_config=FeatureConfig(),
        ransac_config=RansacConfig(seed=args.seed),
    )
    summary = diagnose_directory(args.input, args.output, options)
    for report in summary.reports:
        print(
            f"{report.image_a} / {report.image_b}: {report.total_matches} matches, "
            f"patch fraction {report.patch_match_fraction:.4f} (area {report.area_fraction:.4f})"
            + (f" [{', '.join(report.flags)}]" if report.flags else "")
        )
    print(Path(args.output) / "diagnostics.json")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidParameterError(f"cannot read sweep config {args.config}: {exc}") from exc
    config = parse_model(SweepConfig, payload)
    report = run_sweep(
        config,
        args.output,
        workers=args.workers,
        feature_config=FeatureConfig(),
        ransac_config=RansacConfig(seed=config.seed),
    )
    for row in report.rows:
        print(f"{config.axis.value}={row.value}: {row.status}" + (f" ({row.error})" if row.error else ""))
    return EXIT_FAILURE if report.failed_cells == len(report.rows) else EXIT_OK


def _parse_params(items: list[str]) -> dict[str, float | int]:
    params: dict[str, float | int] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InvalidParameterError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = int(raw)
        except ValueError:
            try:
                params[key.strip()] = float(raw)
            except ValueError as exc:
                raise InvalidParameterError(f"parameter {key!r} is not numeric: {raw!r}") from exc
    return params


def cmd_perturb(args: argparse.Namespace) -> int:
    if args.preset:
        perturbation: Perturbation = BASELINE_PRESETS[args.preset]
    elif args.kind:
        perturbation = build_perturbation(args.kind, **_parse_params(args.param or []))
    else:
        raise InvalidParameterError("either --kind or --preset is required")
    dataset = load_scene(args.input, _background(args.background))
    images = []
    entries = []
    for index, relative in enumerate(dataset.relative_paths):
        entry = PerturbationEntry(source=relative)
        try:
            images.append(perturbation.apply(dataset.read(index)))
            entry.output = relative
        except Exception as exc:
            logger.exception("Failed to perturb %s", relative)
            images.append(None)
            entry.error = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    manifest = PerturbationManifest(
        kind=perturbation.NAME,
        parameters=perturbation.parameters(),
        background=dataset.background,
        input_dir=str(dataset.root),
        output_dir=str(args.output),
        entries=entries,
    )
    summary = write_outputs(dataset, images, manifest, args.output)
    print(summary.artifact)
    failed = any(e.error for e in entries) or not summary.ok
    return EXIT_PARTIAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="patchpoison", description="PatchPoison command-line interface")
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    backgrounds = [p.value for p in BackgroundPolicy]

    poison = subparsers.add_parser("poison", help="Embed the patch into a dataset")
    poison.add_argument("--input", required=True, help="Scene directory")
    poison.add_argument("--output", required=True, help="Output directory (mirrors input paths)")
    poison.add_argument("--pattern", choices=sorted(PATTERN_MAP), default="checkerboard", help="Pattern kind")
    poison.add_argument("--size", type=int, default=12, help="Patch side P in pixels (default: 12)")
    poison.add_argument("--size-fraction", type=float, help="Patch side as a fraction of image width")
    poison.add_argument("--block", type=int, default=4, help="Block size b in pixels (default: 4)")
    poison.add_argument("--alpha", type=float, default=1.0, help="Blend factor in [0, 1] (default: 1.0)")
    poison.add_argument("--contrast", type=int, default=255, help="Bright level; contrast against dark (default: 255)")
    poison.add_argument("--dark", type=int, default=0, help="Dark level (default: 0)")
    poison.add_argument("--corner", choices=[c.value for c in Corner], default=Corner.TOP_LEFT.value)
    poison.add_argument("--margin", type=int, default=0, help="Distance from the corner in pixels")
    poison.add_argument("--ratio", type=float, default=1.0, help="Share of images to poison (default: 1.0)")
    poison.add_argument("--seed", type=int, default=0, help="Selection seed (default: 0)")
    poison.add_argument("--background", choices=backgrounds, help="Alpha compositing policy")
    poison.add_argument("--workers", type=int, default=1, help="Worker threads (default: 1)")

    evaluate = subparsers.add_parser("evaluate", help="SSIM / PSNR between aligned directories")
    evaluate.add_argument("--poisoned", required=True, help="Poisoned (or rendered) images")
    evaluate.add_argument("--original", required=True, help="Reference images")
    evaluate.add_argument("--output", required=True, help="Directory for the report and CSV")
    evaluate.add_argument("--direction", choices=[d.value for d in Direction], default=Direction.POISONED_VS_ORIGINAL.value)
    evaluate.add_argument("--lpips", help="JSON sidecar mapping image path to LPIPS")
    evaluate.add_argument("--background", choices=backgrounds, help="Alpha compositing policy")
    evaluate.add_argument("--workers", type=int, default=1, help="Worker threads (default: 1)")

    diagnose = subparsers.add_parser("diagnose", help="Two-view correspondence diagnostics")
    diagnose.add_argument("--input", required=True, help="Scene directory (poisoned or clean)")
    diagnose.add_argument("--output", required=True, help="Directory for the reports")
    diagnose.add_argument("--pairs", type=int, help="Diagnose only the first k consecutive pairs")
    diagnose.add_argument("--gt", help="transforms.json with ground-truth cameras")
    diagnose.add_argument("--manifest", help="Poison manifest giving the patch regions")
    diagnose.add_argument("--dump-features", action="store_true", help="Write keypoints, descriptors and matches")
    diagnose.add_argument("--background", choices=backgrounds, help="Alpha compositing policy")
    diagnose.add_argument("--seed", type=int, default=0, help="RANSAC seed (default: 0)")

    sweep = subparsers.add_parser("sweep", help="Run an ablation sweep from a JSON config")
    sweep.add_argument("config", help="Sweep config file")
    sweep.add_argument("--output", help="Output directory (overrides the config)")
    sweep.add_argument("--workers", type=int, default=1, help="Worker threads per cell (default: 1)")

    perturb = subparsers.add_parser("perturb", help="Apply a baseline perturbation to a dataset")
    perturb.add_argument("--input", required=True, help="Scene directory")
    perturb.add_argument("--output", required=True, help="Output directory")
    perturb.add_argument("--kind", choices=sorted(PERTURBATION_MAP), help="Perturbation kind")
    perturb.add_argument("--param", action="append", metavar="KEY=VALUE", help="Perturbation parameter")
    perturb.add_argument("--preset", choices=sorted(BASELINE_PRESETS), help="Named baseline setting")
    perturb.add_argument("--background", choices=backgrounds, help="Alpha compositing policy")

    return parser


COMMANDS = {
    "poison": cmd_poison,
    "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "perturb": cmd_perturb,
}


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return int(exc.code or 0)

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help(sys.stderr)
        return EXIT_FAILURE

    settings = get_settings()
    configure_logging(settings)
    try:
        return handler(args)
    except PatchPoisonError as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"patchpoison {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
