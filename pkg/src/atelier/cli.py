"""Command-line entry points: corpus reproduction, offline utilities, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import imaging
from .config import ServiceConfig
from .corpus import bundled_manifest_path
from .errors import (
    AtelierError,
    ConfigError,
    GuardViolation,
    HashMismatch,
    ManifestError,
)
from .imaging import StrokeSet
from .pipeline import StubBackend
from .session import SessionService, read_archive

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_HASH = 4
EXIT_MANIFEST = 5


def _exit_code(exc: AtelierError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, GuardViolation):
        return EXIT_GUARD
    if isinstance(exc, HashMismatch):
        return EXIT_HASH
    if isinstance(exc, ManifestError):
        return EXIT_MANIFEST
    return EXIT_ERROR


def _fail(exc: AtelierError):
    click.echo(f"error [{exc.code}]: {exc.message}", err=True)
    sys.exit(_exit_code(exc))


def _backend(name: str):
    if name != "stub":
        raise ManifestError(
            f"backend {name!r} is not available; only 'stub' ships built in")
    return StubBackend()


@click.group()
def main():
    """Local art-therapy pipeline tools."""


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path),
              default=None, help="Corpus manifest (defaults to the bundled one).")
@click.option("--backend", default="stub", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed-override", type=int, default=None)
@click.option("--parallel", type=int, default=1, show_default=True)
def reproduce(manifest_path, backend, out_dir, seed_override, parallel):
    """Reproduce the example corpus end-to-end."""
    from .reproduce import reproduce as run

    if parallel > 1 and backend != "stub":
        raise click.UsageError("--parallel is only allowed with the stub backend")
    try:
        summary = run(manifest_path or bundled_manifest_path(), _backend(backend),
                      out_dir, seed_override=seed_override, parallel=parallel)
    except AtelierError as exc:
        _fail(exc)
    for case in summary["cases"]:
        click.echo(f"case {case['id']}: {case['status']}")
    if summary["failed"]:
        click.echo(f"{summary['failed']} case(s) failed", err=True)
        sys.exit(EXIT_ERROR)


@main.command()
@click.argument("input_path", type=click.Path(path_type=Path, exists=True))
@click.argument("output_path", type=click.Path(path_type=Path))
@click.option("--detector", default="gradient", show_default=True)
@click.option("--threshold", type=int, default=None)
def edges(input_path, output_path, detector, threshold):
    """Extract an edge map PNG from an image."""
    try:
        image = imaging.ingest_image(input_path.read_bytes())
        edge_map = imaging.detect_edges(image, detector, threshold=threshold)
    except AtelierError as exc:
        _fail(exc)
    output_path.write_bytes(edge_map.to_png_bytes())
    click.echo(f"wrote {output_path} ({edge_map.width}x{edge_map.height})")


@main.command("mask-from-strokes")
@click.argument("strokes_path", type=click.Path(path_type=Path, exists=True))
@click.argument("output_path", type=click.Path(path_type=Path))
@click.option("--width", type=int, required=True)
@click.option("--height", type=int, required=True)
def mask_from_strokes(strokes_path, output_path, width, height):
    """Rasterize a strokes JSON file to a binary mask PNG."""
    try:
        strokes = StrokeSet.from_json_obj(json.loads(strokes_path.read_text("utf-8")))
        mask = imaging.rasterize_mask(strokes, width, height)
    except AtelierError as exc:
        _fail(exc)
    output_path.write_bytes(mask.to_png_bytes())
    click.echo(f"wrote {output_path} (masked fraction {mask.masked_fraction:.4f})")


@main.group()
def session():
    """Session archive import/export."""


@session.command("export")
@click.argument("session_id")
@click.argument("archive_path", type=click.Path(path_type=Path))
@click.option("--data-dir", type=click.Path(path_type=Path), default=Path("atelier-data"),
              envvar="ATELIER_DATA_DIR", show_default=True)
def session_export(session_id, archive_path, data_dir):
    try:
        svc = SessionService(data_dir)
        svc.export_session(svc.load(session_id), archive_path)
    except AtelierError as exc:
        _fail(exc)
    click.echo(f"exported {session_id} to {archive_path}")


@session.command("import")
@click.argument("archive_path", type=click.Path(path_type=Path, exists=True))
@click.option("--data-dir", type=click.Path(path_type=Path), default=Path("atelier-data"),
              envvar="ATELIER_DATA_DIR", show_default=True)
def session_import(archive_path, data_dir):
    try:
        imported = SessionService(data_dir).import_session(archive_path)
    except AtelierError as exc:
        _fail(exc)
    click.echo(f"imported session {imported.session_id}")


@main.command()
@click.argument("archive_path", type=click.Path(path_type=Path, exists=True))
def verify(archive_path):
    """Re-hash every artifact in an archive; exit 4 on any mismatch."""
    try:
        manifest, artifacts = read_archive(archive_path)
    except HashMismatch as exc:
        click.echo(f"hash mismatch: {exc.message}", err=True)
        sys.exit(EXIT_HASH)
    except AtelierError as exc:
        _fail(exc)
    click.echo(f"ok: {len(artifacts)} artifact(s) verified "
               f"({manifest['hash_algorithm']})")


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def serve(config_path):
    """Run the local HTTP service."""
    from . import service

    try:
        cfg = ServiceConfig.load(config_path)
        cfg.validate()
    except GuardViolation as exc:
        click.echo(f"guard violation: {exc.message}", err=True)
        sys.exit(EXIT_GUARD)
    except AtelierError as exc:
        click.echo(f"config error: {exc.message}", err=True)
        sys.exit(EXIT_CONFIG)
    service.run(cfg)


if __name__ == "__main__":
    main()
