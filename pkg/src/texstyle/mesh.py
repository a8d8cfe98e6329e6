"""Triangle meshes: OBJ subset loader plus procedural test shapes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class Mesh:
    """Indexed triangle mesh.

    ``faces`` is (F, 3, 3) int32: per corner (position, uv, normal) indices.
    """

    positions: np.ndarray  # (V, 3) float32
    texcoords: np.ndarray  # (VT, 2) float32, uv in [0, 1]
    normals: np.ndarray    # (VN, 3) float32, unit length
    faces: np.ndarray      # (F, 3, 3) int32

    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def validate(self) -> None:
        f = self.faces
        if f.size and (
            f[:, :, 0].max() >= len(self.positions)
            or f[:, :, 1].max() >= len(self.texcoords)
            or f[:, :, 2].max() >= len(self.normals)
            or f.min() < 0
        ):
            raise ConfigurationError("mesh face indices out of range")
        norms = np.linalg.norm(self.normals, axis=1)
        if self.normals.size and not np.all(np.abs(norms - 1.0) < 1e-4):
            raise ConfigurationError("mesh normals must be unit length")


def _face_areas(positions: np.ndarray, tri_pos: np.ndarray) -> np.ndarray:
    a = positions[tri_pos[:, 0]]
    b = positions[tri_pos[:, 1]]
    c = positions[tri_pos[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _vertex_normals(positions: np.ndarray, tri_pos: np.ndarray) -> np.ndarray:
    """Area-weighted face-normal averaging (unnormalized cross = 2x area)."""
    acc = np.zeros_like(positions)
    a = positions[tri_pos[:, 0]]
    b = positions[tri_pos[:, 1]]
    c = positions[tri_pos[:, 2]]
    fn = np.cross(b - a, c - a)
    for k in range(3):
        np.add.at(acc, tri_pos[:, k], fn)
    lens = np.linalg.norm(acc, axis=1, keepdims=True)
    lens[lens == 0] = 1.0
    return (acc / lens).astype(np.float32)


def _parse_face_corner(token: str, nv: int, nvt: int, nvn: int) -> tuple[int, int, int]:
    parts = token.split("/")
    def resolve(s: str, count: int) -> int:
        idx = int(s)
        idx = idx - 1 if idx > 0 else count + idx
        if idx < 0 or idx >= count:
            raise ConfigurationError(f"OBJ face index {s} out of range")
        return idx

    vi = resolve(parts[0], nv)
    ti = resolve(parts[1], nvt) if len(parts) > 1 and parts[1] else -1
    ni = resolve(parts[2], nvn) if len(parts) > 2 and parts[2] else -1
    return vi, ti, ni


def load_obj(path) -> Mesh:
    """Parse v/vt/vn/f records; larger faces are fan-triangulated.

    Materials, groups, and everything else are ignored. Faces must carry
    texture coordinates (the whole point is optimizing a texture).
    """
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    normals: list[list[float]] = []
    corners: list[list[tuple[int, int, int]]] = []

    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                positions.append([float(x) for x in parts[1:4]])
            elif tag == "vt":
                texcoords.append([float(x) for x in parts[1:3]])
            elif tag == "vn":
                normals.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                if len(parts) < 4:
                    raise ConfigurationError(f"{path}: face with <3 vertices")
                cs = [
                    _parse_face_corner(t, len(positions), len(texcoords), len(normals))
                    for t in parts[1:]
                ]
                for k in range(1, len(cs) - 1):
                    corners.append([cs[0], cs[k], cs[k + 1]])

    if not corners:
        raise ConfigurationError(f"{path}: no faces found")
    if any(c[1] < 0 for tri in corners for c in tri):
        raise ConfigurationError(f"{path}: faces lack texture coordinates")

    pos = np.asarray(positions, dtype=np.float32)
    uvs = np.asarray(texcoords, dtype=np.float32)
    faces = np.asarray(corners, dtype=np.int32)

    if faces[:, :, 2].min() < 0:
        # No normals in the file: synthesize per-vertex ones and index them
        # by position.
        nrm = _vertex_normals(pos.astype(np.float64), faces[:, :, 0])
        faces[:, :, 2] = faces[:, :, 0]
    else:
        nrm = np.asarray(normals, dtype=np.float32)
        lens = np.linalg.norm(nrm, axis=1, keepdims=True)
        lens[lens == 0] = 1.0
        nrm = nrm / lens

    keep = _face_areas(pos.astype(np.float64), faces[:, :, 0]) > 1e-12
    faces = faces[keep]
    if not len(faces):
        raise ConfigurationError(f"{path}: all faces degenerate")

    mesh = Mesh(pos, uvs, nrm.astype(np.float32), faces)
    mesh.validate()
    return mesh


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in mesh.positions:
            f.write(f"v {p[0]} {p[1]} {p[2]}\n")
        for t in mesh.texcoords:
            f.write(f"vt {t[0]} {t[1]}\n")
        for n in mesh.normals:
            f.write(f"vn {n[0]} {n[1]} {n[2]}\n")
        for tri in mesh.faces:
            toks = " ".join(f"{c[0]+1}/{c[1]+1}/{c[2]+1}" for c in tri)
            f.write(f"f {toks}\n")


# ---------------------------------------------------------------------------
# procedural shapes for demos and tests


def make_quad(size: float = 1.0) -> Mesh:
    """Unit quad in the xy plane facing +z, uv spanning [0,1]^2."""
    s = size / 2.0
    pos = np.array([[-s, -s, 0], [s, -s, 0], [s, s, 0], [-s, s, 0]], dtype=np.float32)
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float32)
    nrm = np.array([[0, 0, 1]], dtype=np.float32)
    faces = np.array(
        [[[0, 0, 0], [1, 1, 0], [2, 2, 0]], [[0, 0, 0], [2, 2, 0], [3, 3, 0]]],
        dtype=np.int32,
    )
    return Mesh(pos, uv, nrm, faces)


def make_cube(size: float = 1.0) -> Mesh:
    """Axis-aligned cube; each face maps to a cell of a 3x2 uv atlas."""
    s = size / 2.0
    face_defs = [
        # (normal, corner order) with outward CCW winding
        ((0, 0, 1), [(-s, -s, s), (s, -s, s), (s, s, s), (-s, s, s)]),
        ((0, 0, -1), [(s, -s, -s), (-s, -s, -s), (-s, s, -s), (s, s, -s)]),
        ((1, 0, 0), [(s, -s, s), (s, -s, -s), (s, s, -s), (s, s, s)]),
        ((-1, 0, 0), [(-s, -s, -s), (-s, -s, s), (-s, s, s), (-s, s, -s)]),
        ((0, 1, 0), [(-s, s, s), (s, s, s), (s, s, -s), (-s, s, -s)]),
        ((0, -1, 0), [(-s, -s, -s), (s, -s, -s), (s, -s, s), (-s, -s, s)]),
    ]
    positions, texcoords, normals, faces = [], [], [], []
    for fi, (n, quad) in enumerate(face_defs):
        cu, cv = fi % 3, fi // 3
        u0, v0 = cu / 3.0, cv / 2.0
        base_p = len(positions)
        base_t = len(texcoords)
        positions.extend(quad)
        texcoords.extend(
            [(u0, v0), (u0 + 1 / 3.0, v0), (u0 + 1 / 3.0, v0 + 0.5), (u0, v0 + 0.5)]
        )
        normals.append(n)
        for a, b, c in ((0, 1, 2), (0, 2, 3)):
            faces.append(
                [
                    [base_p + a, base_t + a, fi],
                    [base_p + b, base_t + b, fi],
                    [base_p + c, base_t + c, fi],
                ]
            )
    return Mesh(
        np.asarray(positions, dtype=np.float32),
        np.asarray(texcoords, dtype=np.float32),
        np.asarray(normals, dtype=np.float32),
        np.asarray(faces, dtype=np.int32),
    )


def make_seam_quads(size: float = 1.0) -> Mesh:
    """Two coplanar quads sharing a vertical edge, with crossed uv halves.

    The left quad maps to the RIGHT texture half and the right quad to the
    LEFT half, so the shared 3D edge corresponds to texture columns W-1 and
    0: adjacent on the surface, maximally distant in the flat image. A flat
    texture optimizer has no way to couple them; rendered windows straddling
    the edge do.
    """
    s = size / 2.0
    pos = np.array(
        [
            [-size, -s, 0], [0, -s, 0], [0, s, 0], [-size, s, 0],  # left quad
            [size, -s, 0], [size, s, 0],                            # right quad extras
        ],
        dtype=np.float32,
    )
    uv = np.array(
        [
            [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 1.0],  # left quad -> right half
            [0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0],  # right quad -> left half
        ],
        dtype=np.float32,
    )
    nrm = np.array([[0, 0, 1]], dtype=np.float32)
    faces = np.array(
        [
            [[0, 0, 0], [1, 1, 0], [2, 2, 0]],
            [[0, 0, 0], [2, 2, 0], [3, 3, 0]],
            [[1, 4, 0], [4, 5, 0], [5, 6, 0]],
            [[1, 4, 0], [5, 6, 0], [2, 7, 0]],
        ],
        dtype=np.int32,
    )
    return Mesh(pos, uv, nrm, faces)
