import argparse
import hashlib
import logging
import os
import sys
import zipfile
from pathlib import Path
from typing import List, Optional

import requests

from shared.errors import ConfigError, ToolkitError
from shared.models import CostParams
from services.features import build_features, export_feature_csv
from services.forecast_io import export_forecasts, import_forecasts, read_header
from services.metrics import accuracy_report
from services.newsvendor import simulate
from services.panel import load_panel, make_splits

from .config import load_config, validate_config
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2

M5_FILES = ("sales_train_validation.csv", "calendar.csv")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _load_valid_config(path: str):
    diagnostics = validate_config(path)
    if diagnostics:
        for line in diagnostics:
            logger.error("config: %s", line)
        raise ConfigError(f"{path} has {len(diagnostics)} problem(s)", diagnostics=diagnostics)
    return load_config(path)


def cmd_validate(args: argparse.Namespace) -> int:
    diagnostics = validate_config(args.config)
    for line in diagnostics:
        print(line)
    if diagnostics:
        return EXIT_INVALID
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_valid_config(args.config)
    manifest = run_pipeline(config)
    if manifest.status != "complete":
        logger.error("Run %s: stage %s failed: %s", manifest.run_id, manifest.failed_stage, manifest.error)
        return EXIT_FAILED
    print(f"Run {manifest.run_id} complete: {len(manifest.artifacts)} artifacts in {config.output.dir}")
    return EXIT_OK


def cmd_export_features(args: argparse.Namespace) -> int:
    config = _load_valid_config(args.config)
    panel = load_panel(config.data.sales, config.data.calendar, config.filter)
    features = build_features(panel)
    target = Path(args.output) if args.output else Path(config.output.dir) / "features.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    n_rows = export_feature_csv(features, panel, target)
    print(f"Wrote {n_rows} feature rows to {target}")
    return EXIT_OK


def cmd_import_forecasts(args: argparse.Namespace) -> int:
    """Check an external forecast file against the panel and score it at every configured b"""
    config = _load_valid_config(args.config)
    panel = load_panel(config.data.sales, config.data.calendar, config.filter)
    fields, _ = read_header(args.file)
    # files without a days header are taken to cover the test window
    window = None if "days" in fields else make_splits(panel, config.splits.valid_days, config.splits.test_days).test_window
    fs = import_forecasts(args.file, panel, window, model_name=args.name)

    report = accuracy_report(fs, panel, pooling=config.sweep.pooling)
    print(f"{fs.model_name} d_{fs.window.start}..d_{fs.window.end}: RMSE {report.rmse:.3f}  MAE {report.mae:.3f}")
    for b in config.sweep.b_values:
        outcome = simulate(fs, panel, CostParams(h=config.sweep.h, b=b), round_orders=config.sweep.round_orders)
        print(f"  b={b:g}: avg cost {outcome.avg_cost:.3f}  fill rate {outcome.fill_rate:.3f}")

    target = Path(config.output.dir) / "forecasts" / f"{fs.model_name}_{fs.split.value}.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    export_forecasts(fs, target)
    print(f"Normalized copy written to {target}")
    return EXIT_OK


def download(url: str, target: Path, sha256: Optional[str] = None, timeout: int = 120) -> Path:
    """Stream a file to disk, checking its SHA-256 when one is given"""
    target.parent.mkdir(parents=True, exist_ok=True)
    partial = target.with_name(target.name + ".part")
    response = requests.get(url, stream=True, timeout=timeout)
    response.raise_for_status()
    digest = hashlib.sha256()
    with open(partial, "wb") as handle:
        for chunk in response.iter_content(1024 * 1024):
            if chunk:
                handle.write(chunk)
                digest.update(chunk)
    if sha256 and digest.hexdigest() != sha256.strip().lower():
        partial.unlink()
        raise ToolkitError(f"SHA-256 mismatch for {url}: got {digest.hexdigest()}", module="cli")
    os.replace(partial, target)
    return target


def cmd_fetch_data(args: argparse.Namespace) -> int:
    dest = Path(args.dest)
    name = args.url.rstrip("/").rsplit("/", 1)[-1].split("?", 1)[0] or "m5.zip"
    logger.info("Downloading %s", args.url)
    try:
        archive = download(args.url, dest / name, sha256=args.sha256)
    except (requests.RequestException, ToolkitError) as e:
        # bad URL or digest
        logger.error("download of %s failed: %s", args.url, e)
        return EXIT_INVALID

    if zipfile.is_zipfile(archive):
        with zipfile.ZipFile(archive) as bundle:
            members = {Path(member).name: member for member in bundle.namelist()}
            missing = [f for f in M5_FILES if f not in members]
            if missing:
                raise ToolkitError(f"{archive} does not contain {missing}", module="cli")
            for filename in M5_FILES:
                with bundle.open(members[filename]) as source, open(dest / filename, "wb") as sink:
                    sink.write(source.read())
        print(f"Extracted {', '.join(M5_FILES)} to {dest}")
    else:
        print(f"Saved {archive}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forecast-eval",
        description="Evaluate demand forecasts by the inventory cost they cause.",
    )
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the full pipeline from a config file")
    run.add_argument("config")
    run.set_defaults(handler=cmd_run)

    validate = commands.add_parser("validate", help="check a config file without running it")
    validate.add_argument("config")
    validate.set_defaults(handler=cmd_validate)

    features = commands.add_parser("export-features", help="write the feature matrix as CSV")
    features.add_argument("config")
    features.add_argument("--output", help="target CSV (default <output dir>/features.csv)")
    features.set_defaults(handler=cmd_export_features)

    ingest = commands.add_parser("import-forecasts", help="validate and score an external forecast file")
    ingest.add_argument("config")
    ingest.add_argument("file")
    ingest.add_argument("--name", help="override the model name in the file header")
    ingest.set_defaults(handler=cmd_import_forecasts)

    fetch = commands.add_parser("fetch-data", help="download the M5 sales and calendar files")
    fetch.add_argument("dest", help="directory to place the CSVs in")
    fetch.add_argument("--url", required=True, help="archive or CSV URL")
    fetch.add_argument("--sha256", help="expected SHA-256 of the download")
    fetch.set_defaults(handler=cmd_fetch_data)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_INVALID
    except ToolkitError as e:
        logger.error("%s", e)
        return EXIT_FAILED
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
