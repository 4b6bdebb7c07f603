"""Coefficients and boundary data of the benchmark problem on (-1, 1)^2.

All region predicates use closed inequalities.
"""
from __future__ import annotations

import numpy as np

from .forward import Coefficients
from .mesh import Mesh

BETA_LOWER = 0.05
BETA_UPPER = 10.0
DEFAULT_ABCD = (1.0, -2.0, 3.0, -4.0)


def in_D(x1, x2):
    return (np.abs(x1) <= 0.5) & (np.abs(x2) <= 0.5)


def in_omega0(x1, x2):
    return 4.0 * x1**2 + 9.0 * x2**2 <= 1.0


def in_omega11(x1, x2):
    return (np.abs(x1) <= 0.75) & (np.abs(x2) <= 0.75)


def in_omega12(x1, x2):
    return np.abs(x1) + np.abs(x2) <= 0.75


def in_omega22(x1, x2):
    return x1**2 + x2**2 <= 9.0 / 16.0


def source(x1, x2):
    return np.where(in_D(x1, x2), 1.5, -0.5)


def alpha(x1, x2):
    a11 = np.where(in_omega11(x1, x2), 2.0, 1.0)
    a12 = np.where(in_omega12(x1, x2), 1.0, 0.0)
    a22 = np.where(in_omega22(x1, x2), 3.0, 2.0)
    return np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)


def beta_true(x1, x2):
    return np.where(in_omega0(x1, x2), 3.0, 1.0)


def coefficients() -> Coefficients:
    return Coefficients(alpha=alpha, f=source, sigma=0.0)


def edge_flux(mesh: Mesh, abcd=DEFAULT_ABCD) -> np.ndarray:
    """Exact flux per boundary edge, resolved at edge midpoints.

    Bottom and left carry the (A, B, C, D) data; right and top carry the fixed flux.
    """
    A, B, C, D = abcd
    mid = mesh.edge_midpoints()
    x1, x2 = mid[:, 0], mid[:, 1]
    side = mesh.edge_sides
    flux = np.full(len(side), np.nan)
    bottom, left = side == "bottom", side == "left"
    right, top = side == "right", side == "top"
    flux[bottom] = np.where((x1[bottom] > 0) & (x1[bottom] <= 1), A, B)
    flux[left] = np.where((x2[left] > -1) & (x2[left] <= 0), C, D)
    flux[right] = np.where((x2[right] > -1) & (x2[right] <= 0), 4.0, -3.0)
    flux[top] = np.where((x1[top] > 0) & (x1[top] <= 1), 2.0, -1.0)
    return flux
