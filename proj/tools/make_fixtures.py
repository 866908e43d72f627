#!/usr/bin/env python3
"""Regenerates the tiny fixture dataset under data/fixtures/.

Frames are 4x4 binary PPM stills whose colour encodes (episode, index), so
every frame has distinct content and a distinct digest.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"

EPISODES = [
    dict(id="fold_towel_000", instruction="Fold the towel.", fps=10, n=12,
         annotations=[("grasp corner", 0.0, 0.5), ("fold over", 0.6, 1.2)],
         success_label=True, platform_tag="so101"),
    dict(id="clean_table_000", instruction="Clean the table", fps=5, n=57,
         annotations=[("pick up sponge", 0.0, 3.9), ("wipe left side", 4.0, 6.4),
                      ("wipe right side", 6.5, 9.5), ("put sponge back", 9.6, 11.4)],
         success_label=True, platform_tag="franka"),
    dict(id="pick_cube_fail_000", instruction="pick up the red cube", fps=4, n=8,
         annotations=None, success_label=False, platform_tag="yam"),
]


def ppm(r, g, b):
    header = b"P6\n4 4\n255\n"
    return header + bytes([r, g, b]) * 16


def main():
    episodes = []
    for ei, ep in enumerate(EPISODES):
        frame_dir = ROOT / "frames" / ep["id"]
        frame_dir.mkdir(parents=True, exist_ok=True)
        frames = []
        for i in range(1, ep["n"] + 1):
            name = f"{i:04d}.ppm"
            (frame_dir / name).write_bytes(ppm(40 * ei + 10, (7 * i) % 256, (13 * i + 5 * ei) % 256))
            frames.append({"index": i, "timestamp_s": round((i - 1) / ep["fps"], 6),
                           "uri": f"frames/{ep['id']}/{name}"})
        rec = {"id": ep["id"], "instruction": ep["instruction"], "fps": ep["fps"], "frames": frames,
               "success_label": ep["success_label"], "platform_tag": ep["platform_tag"]}
        if ep["annotations"]:
            rec["annotations"] = [{"name": n, "start_second": s, "end_second": e}
                                  for n, s, e in ep["annotations"]]
        episodes.append(rec)
    manifest = {"dataset_name": "fixture_tiny", "schema_version": "1.0", "episodes": episodes}
    (ROOT / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
