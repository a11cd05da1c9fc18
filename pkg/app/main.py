"""
Command-line entry point.

Subcommands:
    scrape    Harvest record pages and images politely (resumable)
    process   Assign identities, segment, and write the COCO document
    validate  Check a COCO document
    mock      Generate (and optionally serve) the synthetic archive

Exit codes: 0 ok, 1 abort, 2 partial, 3 validation failure.

Run with `python -m app.main <command> --help`.
"""
import argparse
import asyncio
import logging
import sys
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.config import ID_PLACEHOLDER, ConfigError, RunConfig, load_run_config
from app.services.coco_service import CocoError, parse_document, validate
from app.services.harvest_service import HarvestError, HarvestJournal, run_harvest
from app.services.identity_service import EmptyCollection, IdentityError
from app.services.manifest_service import ManifestError, parse_dataset_info, render_dataset_info
from app.services.mock_site import MockArchiveError, MockSpec, generate_site
from app.services.polite_client import PoliteClient
from app.services.processing_service import run_processing
from app.schemas.dataset import DatasetInfo, LicenseInfo
from app.utils.helpers import atomic_write

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
MOCK_RECORD_PATH = "/bf_record.cfm?id={id}"


class ExitCode(IntEnum):
    """Stable process exit codes."""

    OK = 0
    ABORT = 1
    PARTIAL = 2
    INVALID = 3


def configure_logging(level: str, log_file: Optional[Path] = None) -> None:
    """Configure the root logger: stderr plus an optional log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def record_url_template(base_url: str) -> str:
    """
    Template for --base-url.

    A value containing "{id}" is used as is; otherwise the mock archive's
    record path is appended.
    """
    if ID_PLACEHOLDER in base_url:
        return base_url
    return base_url.rstrip("/") + MOCK_RECORD_PATH


def build_client(config: RunConfig) -> PoliteClient:
    """HTTP client used by `scrape`."""
    return PoliteClient.from_config(config)


def _absolute(path: Optional[Path]) -> Optional[Path]:
    # Flag paths are relative to the working directory, not to output_dir.
    return Path(path).resolve() if path is not None else None


def _load_config(args: argparse.Namespace, overrides: Dict[str, Any]) -> RunConfig:
    config = load_run_config(args.config, overrides)
    if args.log_level is None:
        logging.getLogger().setLevel(getattr(logging, config.log_level, logging.INFO))
    return config


def _print(text: str) -> None:
    print(text, file=sys.stdout)


def cmd_scrape(args: argparse.Namespace) -> int:
    """Harvest records and images."""
    overrides: Dict[str, Any] = {
        "id_range": args.ids,
        "output_dir": _absolute(args.out),
        "min_delay_s": args.min_delay,
        "max_delay_s": args.max_delay,
        "rng_seed": args.seed,
        "user_agent": args.user_agent,
    }
    if args.base_url:
        overrides["base_record_url_template"] = record_url_template(args.base_url)
    try:
        config = _load_config(args, overrides)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return ExitCode.ABORT

    async def _run():
        async with build_client(config) as client:
            return await run_harvest(
                config,
                client,
                HarvestJournal(config.journal_path),
                resume=args.resume,
                max_records=args.limit,
            )

    try:
        report = asyncio.run(_run())
    except HarvestError as e:
        logger.error(f"Harvest aborted: {e}")
        return ExitCode.ABORT

    _print(
        f"records_planned={report.records_planned} records_ok={report.records_ok} "
        f"records_failed={report.records_failed} images_saved={report.images_saved} "
        f"images_skipped={report.images_skipped} csv={report.csv_path or '-'}"
    )
    return ExitCode.PARTIAL if report.records_failed else ExitCode.OK


def cmd_process(args: argparse.Namespace) -> int:
    """Identity, segmentation and COCO over the harvested images."""
    overrides: Dict[str, Any] = {
        "output_dir": _absolute(args.coco_out),
        "original_images_dir": _absolute(args.input_dir),
        "uuid_images_dir": _absolute(args.out_images),
        "dataset_info_path": _absolute(args.dataset_info),
        "jobs": args.jobs,
        "polygon_epsilon_px": args.epsilon,
    }
    try:
        config = _load_config(args, overrides)
        manifest_path = config.resolve(config.dataset_info_path)
        info = parse_dataset_info(manifest_path.read_text(encoding="utf-8"))
    except (ConfigError, ManifestError) as e:
        logger.error(f"Configuration error: {e}")
        return ExitCode.ABORT
    except OSError as e:
        logger.error(f"Cannot read dataset info: {e}")
        return ExitCode.ABORT

    try:
        report = run_processing(
            config,
            info,
            overlays=args.overlays,
            masks=args.masks,
            seed=args.seed,
        )
    except EmptyCollection as e:
        logger.error(f"Nothing to process: {e}")
        return ExitCode.ABORT
    except (IdentityError, CocoError, OSError) as e:
        logger.error(f"Processing aborted: {e}")
        return ExitCode.ABORT

    _print(
        f"images={report.images} annotations={report.annotations} "
        f"excluded={len(report.excluded)} skipped={len(report.skipped)} "
        f"flagged={len(report.flagged)} coco={report.coco_path}"
    )
    if report.violations:
        for violation in report.violations:
            _print(violation)
        return ExitCode.INVALID
    return ExitCode.OK if report.clean else ExitCode.PARTIAL


def cmd_validate(args: argparse.Namespace) -> int:
    """Validate a COCO document."""
    try:
        document = parse_document(Path(args.coco).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, CocoError) as e:
        logger.error(f"Cannot read COCO document {args.coco}: {e}")
        return ExitCode.ABORT

    violations = validate(document)
    for violation in violations:
        _print(str(violation))
    if violations:
        logger.error(f"{args.coco}: {len(violations)} violations")
        return ExitCode.INVALID
    _print(f"{args.coco}: valid ({len(document.images)} images, {len(document.annotations)} annotations)")
    return ExitCode.OK


def starter_dataset_info(site_url: str) -> DatasetInfo:
    """Manifest describing a mock archive."""
    return DatasetInfo(
        description="Synthetic biface collection generated for offline testing",
        url=site_url,
        collection_short_name="mock_bifaces",
        version="1.0",
        year=2024,
        contributor="Mock archive generator",
        date_created="2024-01-01",
        licenses=[LicenseInfo(id=1, name="CC BY 4.0", url="https://creativecommons.org/licenses/by/4.0/")],
    )


def cmd_mock(args: argparse.Namespace) -> int:
    """Generate and optionally serve the mock archive."""
    from app.api.mock_archive import serve

    try:
        spec = MockSpec(
            record_count=args.records,
            seed=args.seed,
            adversarial=args.adversarial,
            width=args.width,
            height=args.height,
        )
    except ValueError as e:
        logger.error(f"Invalid mock parameters: {e}")
        return ExitCode.ABORT

    out = Path(args.out)
    try:
        generated = generate_site(spec, out)
    except MockArchiveError as e:
        logger.error(str(e))
        return ExitCode.ABORT

    if args.dataset_info:
        port = args.serve or 8000
        atomic_write(
            Path(args.dataset_info), render_dataset_info(starter_dataset_info(f"http://127.0.0.1:{port}/"))
        )
    _print(f"site={out} records={spec.record_count} images={len(generated)}")

    if args.serve is not None:
        try:
            serve(out, args.serve)
        except MockArchiveError as e:
            logger.error(str(e))
            return ExitCode.ABORT
    return ExitCode.OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="bifaces",
        description="Harvest a web-published biface collection and build a COCO segmentation dataset.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", type=Path, default=None, help="Also write logs to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    scrape = sub.add_parser("scrape", help="Harvest record pages and images")
    scrape.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    scrape.add_argument("--base-url", default=None, help="Site base URL or record URL template with {id}")
    scrape.add_argument("--ids", default=None, help="Inclusive id range, e.g. 1..3556")
    scrape.add_argument("--out", type=Path, default=None, help="Output directory")
    scrape.add_argument("--resume", action="store_true", help="Continue from the harvest journal")
    scrape.add_argument("--limit", type=int, default=None, help="Stop after N records")
    scrape.add_argument("--min-delay", type=float, default=None, help="Minimum delay between requests (s)")
    scrape.add_argument("--max-delay", type=float, default=None, help="Maximum delay between requests (s)")
    scrape.add_argument("--seed", type=int, default=None, help="Delay sampler seed")
    scrape.add_argument("--user-agent", default=None, help="User-Agent header")
    scrape.set_defaults(func=cmd_scrape)

    process = sub.add_parser("process", help="Assign UUIDs, segment and write COCO")
    process.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    process.add_argument("--in", dest="input_dir", type=Path, default=None, help="original_images/ directory")
    process.add_argument("--out-images", type=Path, default=None, help="uuid_images/ directory")
    process.add_argument("--coco-out", type=Path, default=None, help="Directory for the COCO document")
    process.add_argument("--dataset-info", type=Path, default=None, help="dataset_info.md path")
    process.add_argument("--overlays", action="store_true", help="Write overlays/<uuid>.png")
    process.add_argument("--masks", action="store_true", help="Write masks/<uuid>.png")
    process.add_argument("--jobs", type=int, default=None, help="Segmentation worker threads")
    process.add_argument("--epsilon", type=float, default=None, help="Polygon simplification tolerance (px)")
    process.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    process.set_defaults(func=cmd_process)

    check = sub.add_parser("validate", help="Validate a COCO document")
    check.add_argument("--coco", required=True, type=Path, help="COCO JSON file")
    check.set_defaults(func=cmd_validate)

    mock = sub.add_parser("mock", help="Generate the synthetic archive")
    mock.add_argument("--records", type=int, default=25, help="Number of records")
    mock.add_argument("--seed", type=int, default=1, help="Generator seed")
    mock.add_argument("--out", type=Path, default=Path("mock_site"), help="Site directory")
    mock.add_argument("--serve", type=int, default=None, metavar="PORT", help="Serve the site on this port")
    mock.add_argument("--adversarial", action="store_true", help="Oversized scale bars")
    mock.add_argument("--width", type=int, default=400, help="Image width")
    mock.add_argument("--height", type=int, default=300, help="Image height")
    mock.add_argument("--dataset-info", type=Path, default=None, help="Write a starter dataset_info.md here")
    mock.set_defaults(func=cmd_mock)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO", args.log_file)
    try:
        return int(args.func(args))
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return ExitCode.ABORT


if __name__ == "__main__":
    sys.exit(main())
