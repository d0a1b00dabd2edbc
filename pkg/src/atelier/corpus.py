"""Bundled example corpus: three stand-in drafts plus the prompt set.

The original drafts behind the published examples are not distributable;
the bundled images are stand-ins created for this repository, matching the
described complexity ladder: (1) a black-and-white line sketch, (2) an
abstract color painting scan, (3) a photo of a 3D foil figure.
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path

PROMPTS = {
    "P1.b": "A head of woman in pot, realistic facial features, ranunculus on her head, representing personal growth and renewal, messy background, detailed, high quality.",
    "P1.c": "A woman with a long, flowing blonde hairstyle, adding waves and volume.",
    "P2.b": "An abstract painting showing a spiral. It symbolises insecurity and fears. Blue and black colors. There's a red thunderstorm shaped line from top to the center of the spiral.",
    "P2.c": "A painting of light spreading spherically from the center, warm colors, representing calmness, clarity and hope, matching the artistic style.",
    "P3.b": "A small figure made of aluminum foil and wire depicting a man on his knees with his arms up in the air. The man seems helplessness.",
    "P3.c": "A small figure made of aluminum foil depicting a man in an upright position with his arms up in the air.",
}


def corpus_dir() -> Path:
    return Path(str(importlib.resources.files("atelier") / "corpus"))


def bundled_manifest_path() -> Path:
    return corpus_dir() / "manifest.json"


def load_manifest(path: Path) -> dict:
    return json.loads(Path(path).read_text("utf-8"))
