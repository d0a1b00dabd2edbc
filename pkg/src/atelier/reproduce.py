"""Batch reproduction of the bundled example corpus.

Each case runs the full pipeline: draft -> edge map -> refined artwork ->
mask -> adapted artwork, emitting all five images, an HTML contact sheet
(one row per case) and a machine-readable summary with hashes, wall times
and resolved params.
"""

from __future__ import annotations

import base64
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import imaging, pipeline
from .errors import AtelierError, ManifestError
from .imaging import StrokeSet
from .pipeline import GenerationParams, GenerativeBackend, Prompt
from .session import content_hash

REPORT_VERSION = "report/1"


def _load_case_mask(case: dict, base: Path, width: int, height: int) -> imaging.MaskImage:
    if "strokes_path" in case:
        strokes_obj = json.loads((base / case["strokes_path"]).read_text("utf-8"))
        return imaging.rasterize_mask(StrokeSet.from_json_obj(strokes_obj), width, height)
    if "mask_path" in case:
        values = imaging.decode_single_channel_png((base / case["mask_path"]).read_bytes())
        return imaging.MaskImage(values=(values >= 128).astype("uint8") * 255)
    raise ManifestError(f"case {case.get('id')!r} has neither strokes_path nor mask_path")


def _validate_manifest(manifest: dict, base: Path) -> list[dict]:
    cases = manifest.get("cases")
    if not cases:
        raise ManifestError("manifest has no cases")
    seen_ids = set()
    for case in cases:
        cid = case.get("id")
        if not cid or cid in seen_ids:
            raise ManifestError(f"missing or duplicate case id {cid!r}")
        seen_ids.add(cid)
        if not case.get("refine_prompt") or not case.get("adapt_prompt"):
            raise ManifestError(f"case {cid!r} has an empty prompt")
        for key in ("draft_path", "strokes_path", "mask_path"):
            if key in case and not (base / case[key]).exists():
                raise ManifestError(f"case {cid!r}: {case[key]!r} does not exist")
        if "draft_path" not in case:
            raise ManifestError(f"case {cid!r} lacks draft_path")
    return cases


def run_case(case: dict, base: Path, backend: GenerativeBackend, out_dir: Path,
             seed_override: int | None = None) -> dict:
    cid = case["id"]
    started = time.monotonic()
    params_obj = dict(case.get("params", {}))
    if seed_override is not None:
        params_obj["seed"] = seed_override
    params = GenerationParams.from_dict(params_obj) if params_obj else GenerationParams()

    draft = imaging.ingest_image((base / case["draft_path"]).read_bytes())
    edges = imaging.detect_edges(draft, "gradient")
    t0 = time.monotonic()
    artwork = pipeline.generate_from_sketch(
        edges, Prompt(text=case["refine_prompt"]), params, backend)
    generate_ms = int((time.monotonic() - t0) * 1000)
    mask = _load_case_mask(case, base, artwork.width, artwork.height)
    t0 = time.monotonic()
    adapted = pipeline.inpaint(
        artwork, mask, Prompt(text=case["adapt_prompt"]), params, backend)
    inpaint_ms = int((time.monotonic() - t0) * 1000)

    outputs = {
        "draft": draft.to_png_bytes(),
        "edges": edges.to_png_bytes(),
        "artwork": artwork.to_png_bytes(),
        "mask": mask.to_png_bytes(),
        "adapted": adapted.to_png_bytes(),
    }
    hashes = {}
    for name, data in outputs.items():
        path = out_dir / f"case{cid}_{name}.png"
        path.write_bytes(data)
        hashes[name] = content_hash(data)
    return {
        "id": cid,
        "status": "ok",
        "hashes": hashes,
        "params": params.to_dict(),
        "wall_time_ms": {"generate": generate_ms, "inpaint": inpaint_ms,
                         "total": int((time.monotonic() - started) * 1000)},
    }


def _contact_sheet(results: list[dict], out_dir: Path) -> Path:
    def img_tag(cid: str, name: str) -> str:
        path = out_dir / f"case{cid}_{name}.png"
        if not path.exists():
            return "<td>failed</td>"
        b64 = base64.b64encode(path.read_bytes()).decode("ascii")
        return (f'<td><img alt="case {cid} {name}" width="256" '
                f'src="data:image/png;base64,{b64}"></td>')

    rows = []
    for res in results:
        cid = res["id"]
        if res["status"] == "ok":
            cells = "".join(img_tag(cid, n) for n in ("draft", "artwork", "adapted"))
        else:
            cells = f'<td colspan="3">failed: {res.get("error", "")}</td>'
        rows.append(f"<tr><th>case {cid}</th>{cells}</tr>")
    html = (
        "<!doctype html><html><head><meta charset='utf-8'>"
        "<title>reproduction contact sheet</title></head><body>"
        "<table border='1' cellpadding='4'>"
        "<tr><th></th><th>(a) draft</th><th>(b) artistic work</th><th>(c) adaptation</th></tr>"
        + "".join(rows) + "</table></body></html>"
    )
    path = out_dir / "contact_sheet.html"
    path.write_text(html, "utf-8")
    return path


def reproduce(manifest_path: Path, backend: GenerativeBackend, out_dir: Path,
              seed_override: int | None = None, parallel: int = 1) -> dict:
    """Run every case; per-case failures are recorded and the run continues."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    base = manifest_path.parent
    cases = _validate_manifest(manifest, base)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def safe_run(case: dict) -> dict:
        try:
            return run_case(case, base, backend, out_dir, seed_override)
        except AtelierError as exc:
            return {"id": case["id"], "status": "failed",
                    "error": f"{exc.code}: {exc.message}"}

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(safe_run, cases))
    else:
        results = [safe_run(c) for c in cases]

    summary = {
        "version": REPORT_VERSION,
        "backend": backend.descriptor.name,
        "cases": results,
        "failed": sum(1 for r in results if r["status"] != "ok"),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", "utf-8")
    _contact_sheet(results, out_dir)
    return summary
