"""One-time generator for the bundled stand-in corpus.

Run from the repo root: python tools/make_corpus.py
Regenerates src/atelier/corpus/{draft*.png, strokes*.json, manifest.json}.
"""

import json
import math
from pathlib import Path

from PIL import Image, ImageDraw

OUT = Path(__file__).resolve().parents[1] / "src" / "atelier" / "corpus"

P1B = "A head of woman in pot, realistic facial features, ranunculus on her head, representing personal growth and renewal, messy background, detailed, high quality."
P1C = "A woman with a long, flowing blonde hairstyle, adding waves and volume."
P2B = "An abstract painting showing a spiral. It symbolises insecurity and fears. Blue and black colors. There's a red thunderstorm shaped line from top to the center of the spiral."
P2C = "A painting of light spreading spherically from the center, warm colors, representing calmness, clarity and hope, matching the artistic style."
P3B = "A small figure made of aluminum foil and wire depicting a man on his knees with his arms up in the air. The man seems helplessness."
P3C = "A small figure made of aluminum foil depicting a man in an upright position with his arms up in the air."


def draft1():
    # single-line sketch: head silhouette growing out of a pot
    im = Image.new("RGB", (512, 512), "white")
    d = ImageDraw.Draw(im)
    d.ellipse((176, 96, 336, 288), outline="black", width=4)  # head
    d.polygon([(196, 320), (316, 320), (296, 440), (216, 440)], outline="black", width=4)
    d.line([(236, 288), (236, 320)], fill="black", width=4)  # neck
    d.line([(276, 288), (276, 320)], fill="black", width=4)
    d.arc((206, 60, 306, 140), 180, 360, fill="black", width=4)  # flower stem arc
    return im


def draft2():
    # abstract spiral with a red jagged line, on white
    im = Image.new("RGB", (512, 512), "white")
    d = ImageDraw.Draw(im)
    cx, cy = 256, 256
    pts = []
    for i in range(720):
        a = math.radians(i)
        r = 10 + i * 0.28
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    d.line(pts, fill=(20, 30, 120), width=9)
    inner = [(cx + (5 + i * 0.14) * math.cos(math.radians(i + 90)),
              cy + (5 + i * 0.14) * math.sin(math.radians(i + 90))) for i in range(720)]
    d.line(inner, fill=(10, 10, 20), width=5)
    zig = [(256, 10), (230, 70), (270, 120), (240, 180), (262, 230), (256, 256)]
    d.line(zig, fill=(200, 20, 20), width=7)
    return im


def draft3():
    # photo stand-in: gray foil figure, kneeling, arms up, on gradient backdrop
    im = Image.new("RGB", (512, 512))
    px = im.load()
    for y in range(512):
        v = 210 - y // 8
        for x in range(512):
            px[x, y] = (v, v, v + 6)
    d = ImageDraw.Draw(im)
    silver = (168, 170, 176)
    d.ellipse((236, 120, 286, 170), fill=silver)                      # head
    d.polygon([(246, 170), (276, 170), (290, 300), (232, 300)], fill=silver)  # torso
    d.line([(250, 185), (200, 110)], fill=silver, width=14)           # arms up
    d.line([(272, 185), (322, 110)], fill=silver, width=14)
    d.polygon([(232, 300), (290, 300), (310, 360), (212, 360)], fill=silver)  # kneel
    return im


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    draft1().save(OUT / "draft1.png")
    draft2().save(OUT / "draft2.png")
    draft3().save(OUT / "draft3.png")

    # plausible reconstruction masks, authored as strokes over the 512x512 artwork
    strokes = {
        # hair region around the head
        "strokes1.json": [{"points": [[180, 120], [256, 80], [340, 130], [350, 260]],
                           "radius": 48, "mode": "add"}],
        # spiral center
        "strokes2.json": [{"points": [[256, 256]], "radius": 90, "mode": "add"}],
        # whole body apart from the head
        "strokes3.json": [
            {"points": [[256, 200], [256, 360]], "radius": 80, "mode": "add"},
            {"points": [[261, 145]], "radius": 34, "mode": "erase"},
        ],
    }
    for name, obj in strokes.items():
        (OUT / name).write_text(json.dumps(obj, indent=2) + "\n")

    manifest = {
        "version": "corpus/1",
        "cases": [
            {"id": "1", "draft_path": "draft1.png", "refine_prompt": P1B,
             "adapt_prompt": P1C, "strokes_path": "strokes1.json",
             "params": {"seed": 101, "steps": 30, "guidance_scale": 7.5,
                        "conditioning_scale": 0.8, "output_size": [512, 512]}},
            {"id": "2", "draft_path": "draft2.png", "refine_prompt": P2B,
             "adapt_prompt": P2C, "strokes_path": "strokes2.json",
             "params": {"seed": 202, "steps": 30, "guidance_scale": 7.5,
                        "conditioning_scale": 0.8, "output_size": [512, 512]}},
            {"id": "3", "draft_path": "draft3.png", "refine_prompt": P3B,
             "adapt_prompt": P3C, "strokes_path": "strokes3.json",
             "params": {"seed": 303, "steps": 30, "guidance_scale": 7.5,
                        "conditioning_scale": 0.8, "output_size": [512, 512]}},
        ],
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote corpus to {OUT}")


if __name__ == "__main__":
    main()
