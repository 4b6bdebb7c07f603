"""Structured triangulations of the square (-1, 1)^2.

Every cell of the uniform l x l grid is cut along its bottom-left to
top-right diagonal. Nodes are numbered row-major, x2 outer and x1 inner,
so node ``(i, j)`` (column ``i``, row ``j``) has index ``j * (l + 1) + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class BoundaryRegion:
    """A union of whole sides of the square."""

    sides: frozenset

    def __post_init__(self):
        sides = frozenset(self.sides)
        if not sides:
            raise ValueError("boundary region must contain at least one side")
        unknown = sides - set(SIDES)
        if unknown:
            raise ValueError(f"unknown side(s): {sorted(unknown)}")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def parse(cls, spec) -> "BoundaryRegion":
        """Build from ``"bottom,left"``, an iterable of names, or a region."""
        if isinstance(spec, BoundaryRegion):
            return spec
        if isinstance(spec, str):
            spec = [s.strip() for s in spec.split(",") if s.strip()]
        return cls(frozenset(spec))

    def complement(self) -> frozenset:
        return frozenset(SIDES) - self.sides

    def __str__(self):
        return ",".join(s for s in SIDES if s in self.sides)


@dataclass(frozen=True, eq=False)
class Mesh:
    level: int
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tri, 3), counter-clockwise
    boundary_edges: np.ndarray  # (n_edges, 2), counter-clockwise along the boundary
    edge_sides: np.ndarray  # (n_edges,) side name per boundary edge
    mesh_size: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for counter-clockwise)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def edge_midpoints(self) -> np.ndarray:
        return self.nodes[self.boundary_edges].mean(axis=1)

    def edge_mask(self, region) -> np.ndarray:
        """Boolean mask of boundary edges lying on ``region``."""
        region = BoundaryRegion.parse(region)
        return np.isin(self.edge_sides, sorted(region.sides))

    def node_index(self, i, j):
        return np.asarray(j) * (self.level + 1) + np.asarray(i)


def build_square_mesh(level: int) -> Mesh:
    """Uniform triangulation of (-1, 1)^2 into ``2 level^2`` right triangles."""
    if int(level) != level or level < 1:
        raise ValueError(f"mesh level must be a positive integer, got {level!r}")
    level = int(level)
    n = level + 1
    t = -1.0 + 2.0 * np.arange(n) / level
    x1, x2 = np.meshgrid(t, t)  # rows vary in x2
    nodes = np.column_stack([x1.ravel(), x2.ravel()])

    i, j = np.meshgrid(np.arange(level), np.arange(level))
    i, j = i.ravel(), j.ravel()
    p00 = j * n + i
    p10 = p00 + 1
    p01 = p00 + n
    p11 = p01 + 1
    lower = np.column_stack([p00, p10, p11])
    upper = np.column_stack([p00, p11, p01])
    # interleave so both triangles of a cell are adjacent
    triangles = np.empty((2 * level * level, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(level)
    edges = [
        (np.column_stack([k, k + 1]), "bottom"),
        (np.column_stack([k * n + level, (k + 1) * n + level]), "right"),
        (np.column_stack([level * n + k + 1, level * n + k])[::-1], "top"),
        (np.column_stack([(k + 1) * n, k * n])[::-1], "left"),
    ]
    boundary_edges = np.vstack([e for e, _ in edges]).astype(np.int64)
    edge_sides = np.concatenate([[s] * level for _, s in edges])

    return Mesh(
        level=level,
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        edge_sides=edge_sides,
        mesh_size=float(np.sqrt(8.0) / level),
    )


def boundary_nodes(mesh: Mesh, region) -> np.ndarray:
    """Indices of nodes on the closed union of the region's sides.

    Sorted lexicographically by (x1, x2); shared corners appear once.
    """
    mask = mesh.edge_mask(region)
    idx = np.unique(mesh.boundary_edges[mask].ravel())
    x = mesh.nodes[idx]
    order = np.lexsort((x[:, 1], x[:, 0]))
    return idx[order]


def prolongate(coarse_values, coarse_mesh: Mesh, fine_mesh: Mesh) -> np.ndarray:
    """Evaluate a P1 field of ``coarse_mesh`` at the nodes of the once-refined mesh."""
    if fine_mesh.level != 2 * coarse_mesh.level:
        raise ValueError(
            f"prolongation needs nested levels (l, 2l), got "
            f"({coarse_mesh.level}, {fine_mesh.level})"
        )
    u = np.asarray(coarse_values, dtype=float)
    if u.shape != (coarse_mesh.n_nodes,):
        raise ValueError("coarse field does not match the coarse mesh")
    lc = coarse_mesh.level
    grid = u.reshape(lc + 1, lc + 1)  # [row j, column i]
    out = np.empty((2 * lc + 1, 2 * lc + 1))
    out[0::2, 0::2] = grid
    out[0::2, 1::2] = 0.5 * (grid[:, :-1] + grid[:, 1:])
    out[1::2, 0::2] = 0.5 * (grid[:-1, :] + grid[1:, :])
    # cell centres sit on the bottom-left/top-right diagonal
    out[1::2, 1::2] = 0.5 * (grid[:-1, :-1] + grid[1:, 1:])
    return out.ravel()


def prolongate_to(values, mesh: Mesh, target: Mesh) -> np.ndarray:
    """Repeated :func:`prolongate` from ``mesh`` up to ``target`` (level ratio a power of 2)."""
    ratio = target.level // mesh.level
    if ratio * mesh.level != target.level or ratio & (ratio - 1):
        raise ValueError("target level must be a power-of-two multiple of the source level")
    u = np.asarray(values, dtype=float)
    current = mesh
    while current.level < target.level:
        finer = target if 2 * current.level == target.level else build_square_mesh(2 * current.level)
        u = prolongate(u, current, finer)
        current = finer
    return u


def evaluate(mesh: Mesh, values, points) -> np.ndarray:
    """Evaluate the P1 field ``values`` at arbitrary points of the closed square."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lv = mesh.level
    s = (pts + 1.0) * lv / 2.0
    ci = np.clip(np.floor(s[:, 0]).astype(int), 0, lv - 1)
    cj = np.clip(np.floor(s[:, 1]).astype(int), 0, lv - 1)
    a = s[:, 0] - ci
    b = s[:, 1] - cj
    u = np.asarray(values, dtype=float).reshape(lv + 1, lv + 1)
    u00 = u[cj, ci]
    u10 = u[cj, ci + 1]
    u01 = u[cj + 1, ci]
    u11 = u[cj + 1, ci + 1]
    lower = a >= b
    return np.where(
        lower,
        u00 + a * (u10 - u00) + b * (u11 - u10),
        u00 + b * (u01 - u00) + a * (u11 - u01),
    )


def dump_mesh(mesh: Mesh) -> str:
    lines = [f"v {x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines += [f"t {i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [
        f"e {i} {j} {side}" for (i, j), side in zip(mesh.boundary_edges.tolist(), mesh.edge_sides)
    ]
    return "\n".join(lines) + "\n"
