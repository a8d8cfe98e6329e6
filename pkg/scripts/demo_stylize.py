"""End-to-end demo on a generated tiny scene (no pretrained weights needed).

Builds a cube with a base texture and a procedural style image, then runs
the CLI stylize path with the toy backbone. Outputs land in demo_out/.

    python3 scripts/demo_stylize.py [--out demo_out] [--iterations 150]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from texstyle.cli import main as cli_main
from texstyle.images import save_image
from texstyle.mesh import make_cube, save_obj


def blob_style(n=48, period=3):
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = np.stack(
        [
            0.5 + 0.5 * np.sin(2 * np.pi * period * xx),
            0.5 + 0.5 * np.cos(2 * np.pi * period * yy),
            0.5 + 0.5 * np.sin(2 * np.pi * period * (xx + yy)),
        ]
    ).astype(np.float32)
    return np.clip(img, 0, 1)


def checker_texture(n=64, cells=8):
    yy, xx = np.mgrid[0:n, 0:n]
    mask = ((yy * cells // n) + (xx * cells // n)) % 2
    img = np.where(mask, 0.65, 0.35).astype(np.float32)
    return np.stack([img, img, img])


def run(out_dir, iterations):
    os.makedirs(out_dir, exist_ok=True)
    mesh_path = os.path.join(out_dir, "cube.obj")
    tex_path = os.path.join(out_dir, "base_texture.png")
    style_path = os.path.join(out_dir, "style.png")
    save_obj(make_cube(), mesh_path)
    save_image(checker_texture(), tex_path)
    save_image(blob_style(), style_path)

    rc = cli_main(
        [
            "stylize",
            "--mesh", mesh_path,
            "--texture", tex_path,
            "--style", style_path,
            "--out", os.path.join(out_dir, "run"),
            "--backbone", "toy",
            "--iterations", str(iterations),
            "--seed", "1",
            "--set", "camera_distance=2.5",
            "--set", "batch_size=2",
            "--set", "render_resolution=48",
            "--set", "texture_resolution=64",
            "--set", "lambda_nnfm=1.0",
            "--set", "lambda_content=0.5",
            "--set", "lambda_color=5.0",
        ]
    )
    if rc == 0:
        print(f"done; see {os.path.join(out_dir, 'run')}")
    return rc


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--iterations", type=int, default=150)
    args = ap.parse_args()
    sys.exit(run(args.out, args.iterations))
