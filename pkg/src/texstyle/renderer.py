"""Software rasterizer with Phong shading and texture gradients.

Visibility (which triangle covers which pixel) is resolved up front into a
G-buffer and treated as constant during the backward pass: only texture
contents are ever optimized, so silhouette gradients are not needed. The
differentiable part is texture lookup -> shading -> pixel placement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigurationError
from .mesh import Mesh
from .tensor import Tensor


@dataclass
class Camera:
    eye: np.ndarray
    target: np.ndarray
    up: np.ndarray
    fov: float = np.deg2rad(45.0)  # vertical, radians
    near: float = 0.1
    far: float = 100.0

    def validate(self) -> None:
        if not (0.0 < self.fov < np.pi):
            raise ConfigurationError("camera fov must be in (0, pi)")
        if not (0.0 < self.near < self.far):
            raise ConfigurationError("camera requires 0 < near < far")


@dataclass
class PointLight:
    position: np.ndarray
    power: float = 2.0

    def validate(self) -> None:
        if self.power < 0:
            raise ConfigurationError("light power must be >= 0")


@dataclass
class Material:
    specular_exponent: float = 2.0
    diffuse: float = 1.0
    specular: float = 0.5
    ambient: float = 0.1

    def validate(self) -> None:
        if min(self.diffuse, self.specular, self.ambient) < 0:
            raise ConfigurationError("material weights must be >= 0")


@dataclass
class GBuffer:
    tri_id: np.ndarray   # (H, W) int32, -1 for background
    bary: np.ndarray     # (H, W, 2) perspective-correct (b1, b2)
    uv: np.ndarray       # (H, W, 2)
    normal: np.ndarray   # (H, W, 3) unit length under the mask
    world: np.ndarray    # (H, W, 3)
    mask: np.ndarray     # (H, W) bool
    depth: np.ndarray    # (H, W) view-space distance, inf for background


def _look_at(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    f = camera.target.astype(np.float64) - camera.eye
    f = f / np.linalg.norm(f)
    r = np.cross(f, camera.up.astype(np.float64))
    rn = np.linalg.norm(r)
    if rn < 1e-9:
        raise ConfigurationError("camera up vector is parallel to the view direction")
    r = r / rn
    u = np.cross(r, f)
    rot = np.stack([r, u, -f])  # camera looks down -z
    return rot, -rot @ camera.eye.astype(np.float64)


def rasterize(mesh: Mesh, camera: Camera, resolution: int) -> GBuffer:
    """Depth-buffered perspective rasterization at pixel centers.

    Back-face culling is on; triangles touching the near plane are skipped
    entirely (no clipping), which is fine for scenes that keep the object
    inside the frustum.
    """
    camera.validate()
    if resolution < 1:
        raise ConfigurationError("resolution must be >= 1")
    res = int(resolution)

    rot, trans = _look_at(camera)
    cam_pts = mesh.positions.astype(np.float64) @ rot.T + trans
    wdist = -cam_pts[:, 2]  # distance along the view axis
    t = 1.0 / np.tan(camera.fov / 2.0)

    # Screen coords, y down. Guard the division for points behind the eye;
    # any triangle using them is skipped below.
    safe_w = np.where(np.abs(wdist) < 1e-12, 1e-12, wdist)
    sx = (t * cam_pts[:, 0] / safe_w + 1.0) * 0.5 * res
    sy = (1.0 - t * cam_pts[:, 1] / safe_w) * 0.5 * res

    tri_id = np.full((res, res), -1, dtype=np.int32)
    depth = np.full((res, res), np.inf, dtype=np.float64)
    bary = np.zeros((res, res, 2), dtype=np.float32)
    uv = np.zeros((res, res, 2), dtype=np.float32)
    normal = np.zeros((res, res, 3), dtype=np.float32)
    world = np.zeros((res, res, 3), dtype=np.float32)

    uvs = mesh.texcoords.astype(np.float64)
    nrms = mesh.normals.astype(np.float64)
    wpos = mesh.positions.astype(np.float64)

    for fi, tri in enumerate(mesh.faces):
        pi = tri[:, 0]
        if np.any(wdist[pi] < camera.near) or np.all(wdist[pi] > camera.far):
            continue
        x0, x1, x2 = sx[pi]
        y0, y1, y2 = sy[pi]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 >= -1e-12:  # back-facing or degenerate on screen (y is down)
            continue

        lo_x = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
        hi_x = min(int(np.ceil(max(x0, x1, x2) + 0.5)), res - 1)
        lo_y = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
        hi_y = min(int(np.ceil(max(y0, y1, y2) + 0.5)), res - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue

        px = np.arange(lo_x, hi_x + 1, dtype=np.float64) + 0.5
        py = np.arange(lo_y, hi_y + 1, dtype=np.float64) + 0.5
        pxg, pyg = np.meshgrid(px, py)

        e0 = (x2 - x1) * (pyg - y1) - (y2 - y1) * (pxg - x1)
        e1 = (x0 - x2) * (pyg - y2) - (y0 - y2) * (pxg - x2)
        e2 = (x1 - x0) * (pyg - y0) - (y1 - y0) * (pxg - x0)
        l0 = e0 / area2
        l1 = e1 / area2
        l2 = e2 / area2
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue

        w0, w1, w2 = wdist[pi]
        inv_w = l0 / w0 + l1 / w1 + l2 / w2
        # inv_w <= 0 only happens outside the triangle; keep values finite so
        # the masked attribute math below never produces inf * 0
        pix_depth = np.where(inv_w > 1e-300, 1.0 / np.maximum(inv_w, 1e-300), 1e300)

        sub_depth = depth[lo_y : hi_y + 1, lo_x : hi_x + 1]
        win = inside & (pix_depth < sub_depth)
        if not win.any():
            continue

        # Perspective-correct barycentrics, zeroed outside the winning set so
        # the interpolation below stays finite everywhere.
        c0 = np.where(win, (l0 / w0) * pix_depth, 0.0)
        c1 = np.where(win, (l1 / w1) * pix_depth, 0.0)
        c2 = np.where(win, (l2 / w2) * pix_depth, 0.0)

        ti, ni = tri[:, 1], tri[:, 2]
        pix_uv = c0[..., None] * uvs[ti[0]] + c1[..., None] * uvs[ti[1]] + c2[..., None] * uvs[ti[2]]
        pix_n = c0[..., None] * nrms[ni[0]] + c1[..., None] * nrms[ni[1]] + c2[..., None] * nrms[ni[2]]
        nlen = np.linalg.norm(pix_n, axis=-1, keepdims=True)
        pix_n = pix_n / np.where(nlen < 1e-12, 1.0, nlen)
        pix_w = c0[..., None] * wpos[pi[0]] + c1[..., None] * wpos[pi[1]] + c2[..., None] * wpos[pi[2]]

        sub = (slice(lo_y, hi_y + 1), slice(lo_x, hi_x + 1))
        depth[sub] = np.where(win, pix_depth, sub_depth)
        tri_id[sub] = np.where(win, fi, tri_id[sub])
        bary[sub] = np.where(win[..., None], np.stack([c1, c2], axis=-1), bary[sub])
        uv[sub] = np.where(win[..., None], pix_uv, uv[sub])
        normal[sub] = np.where(win[..., None], pix_n, normal[sub])
        world[sub] = np.where(win[..., None], pix_w, world[sub])

    return GBuffer(tri_id, bary, uv, normal, world, tri_id >= 0, depth)


def shade(g: GBuffer, texture: Tensor, light: PointLight, mat: Material, camera: Camera) -> Tensor:
    """Phong-shaded image from a G-buffer; gradients flow into the texture.

    Per covered pixel, with unit light/view vectors and d the light distance:
        albedo * (ambient + diffuse * power * max(0, n.l) / d^2)
        + specular * power * max(0, r.v)^exponent / d^2
    Uncovered pixels are 0; the result is clamped to [0, 1].
    """
    light.validate()
    mat.validate()
    h, w = g.mask.shape
    rows, cols = np.nonzero(g.mask)
    n_pix = len(rows)
    if n_pix == 0:
        return Tensor(np.zeros((1, texture.data.shape[1], h, w), dtype=np.float32))

    albedo = T.sample_texture(texture, g.uv[rows, cols])

    n = g.normal[rows, cols].astype(np.float64)
    p = g.world[rows, cols].astype(np.float64)
    to_light = light.position.astype(np.float64) - p
    d2 = np.maximum((to_light * to_light).sum(axis=1), 1e-12)
    l_hat = to_light / np.sqrt(d2)[:, None]
    ndl = np.maximum((n * l_hat).sum(axis=1), 0.0)
    diffuse_k = mat.ambient + mat.diffuse * light.power * ndl / d2

    refl = 2.0 * (n * l_hat).sum(axis=1)[:, None] * n - l_hat
    to_eye = camera.eye.astype(np.float64) - p
    v_hat = to_eye / np.maximum(np.linalg.norm(to_eye, axis=1, keepdims=True), 1e-12)
    rv = np.maximum((refl * v_hat).sum(axis=1), 0.0)
    spec_k = mat.specular * light.power * rv**mat.specular_exponent / d2

    c = texture.data.shape[1]
    diff_t = Tensor(np.repeat(diffuse_k[None, None, None, :], c, axis=1).astype(np.float32))
    spec_t = Tensor(np.repeat(spec_k[None, None, None, :], c, axis=1).astype(np.float32))

    lit = T.clamp01(T.add(T.mul(albedo, diff_t), spec_t))
    return T.scatter_pixels(lit, rows, cols, h, w)


def composite_background(render: Tensor, mask: np.ndarray, background: np.ndarray) -> Tensor:
    """out = mask * render + (1 - mask) * background; background is constant."""
    _, c, h, w = render.data.shape
    if mask.shape != (h, w):
        raise ConfigurationError(f"mask shape {mask.shape} does not match render {h}x{w}")
    if background.shape != (c, h, w):
        raise ConfigurationError(
            f"background shape {background.shape} does not match render {(c, h, w)}"
        )
    m = mask.astype(np.float32)[None, None]
    m3 = np.repeat(m, c, axis=1)
    bg_part = Tensor((background[None] * (1.0 - m3)).astype(np.float32))
    return T.add(T.mul(render, Tensor(m3)), bg_part)
