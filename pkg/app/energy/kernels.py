"""
Array kernels of the discrete area / mean-curvature / Willmore energy.

Every function takes the array namespace ``xp`` (numpy or jax.numpy) so
that the same expression is evaluated directly and differentiated.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

TINY = 1e-300


class FaceGeometry(NamedTuple):
    area: object  # (F,)
    cot: object  # (F, 3) cotangent at each corner
    sq_len: object  # (F, 3) squared length of the edge opposite each corner
    normal: object  # (F, 4) oriented normal, magnitude ~ twice the area


def scatter_add(xp, size: int, index, values):
    shape = (size,) + tuple(values.shape[1:])
    if xp is np:
        out = np.zeros(shape, dtype=values.dtype)
        np.add.at(out, index, values)
        return out
    return xp.zeros(shape, dtype=values.dtype).at[index].add(values)


def _det3(xp, u, v, w, cols):
    i, j, k = cols
    return (
        u[:, i] * (v[:, j] * w[:, k] - v[:, k] * w[:, j])
        - u[:, j] * (v[:, i] * w[:, k] - v[:, k] * w[:, i])
        + u[:, k] * (v[:, i] * w[:, j] - v[:, j] * w[:, i])
    )


def cross4(xp, u, v, w):
    """Vector orthogonal to u, v, w in R^4 (cofactor expansion)."""
    return xp.stack(
        [
            _det3(xp, u, v, w, (1, 2, 3)),
            -_det3(xp, u, v, w, (0, 2, 3)),
            _det3(xp, u, v, w, (0, 1, 3)),
            -_det3(xp, u, v, w, (0, 1, 2)),
        ],
        axis=1,
    )


def face_geometry(xp, X, F) -> FaceGeometry:
    a, b, c = X[F[:, 0]], X[F[:, 1]], X[F[:, 2]]
    ab, ac, bc = b - a, c - a, c - b
    l_ab = xp.sum(ab * ab, axis=1)
    l_ac = xp.sum(ac * ac, axis=1)
    l_bc = xp.sum(bc * bc, axis=1)
    dot_a = xp.sum(ab * ac, axis=1)
    dot_b = -xp.sum(ab * bc, axis=1)
    dot_c = xp.sum(ac * bc, axis=1)
    twice_area = xp.sqrt(xp.maximum(l_ab * l_ac - dot_a * dot_a, TINY))
    cot = xp.stack([dot_a, dot_b, dot_c], axis=1) / twice_area[:, None]
    sq_len = xp.stack([l_bc, l_ac, l_ab], axis=1)
    normal = cross4(xp, ab, ac, (a + b + c) / 3.0)
    return FaceGeometry(0.5 * twice_area, cot, sq_len, normal)


def mixed_areas(xp, geo: FaceGeometry):
    """Per-corner mixed Voronoi areas, (F, 3)."""
    cot, L, A = geo.cot, geo.sq_len, geo.area
    # corner a touches edges ab (opposite c) and ac (opposite b)
    vor = xp.stack(
        [
            L[:, 2] * cot[:, 2] + L[:, 1] * cot[:, 1],
            L[:, 2] * cot[:, 2] + L[:, 0] * cot[:, 0],
            L[:, 1] * cot[:, 1] + L[:, 0] * cot[:, 0],
        ],
        axis=1,
    ) / 8.0
    obtuse = cot < 0.0
    any_obtuse = xp.any(obtuse, axis=1, keepdims=True)
    return xp.where(obtuse, 0.5 * A[:, None], xp.where(any_obtuse, 0.25 * A[:, None], vor))


def area_gradient_raw(xp, X, F, geo: FaceGeometry):
    """Gradient of the total area in R^4 (no tangential projection)."""
    a, b, c = X[F[:, 0]], X[F[:, 1]], X[F[:, 2]]
    ca, cb, cc = geo.cot[:, 0:1], geo.cot[:, 1:2], geo.cot[:, 2:3]
    ga = 0.5 * (cc * (a - b) + cb * (a - c))
    gb = 0.5 * (ca * (b - c) + cc * (b - a))
    gc = 0.5 * (cb * (c - a) + ca * (c - b))
    values = xp.concatenate([ga, gb, gc], axis=0)
    index = xp.concatenate([F[:, 0], F[:, 1], F[:, 2]], axis=0)
    return scatter_add(xp, X.shape[0], index, values)


def vertex_areas(xp, X, F, geo: FaceGeometry):
    corner = mixed_areas(xp, geo)
    index = xp.concatenate([F[:, 0], F[:, 1], F[:, 2]], axis=0)
    values = xp.concatenate([corner[:, 0], corner[:, 1], corner[:, 2]], axis=0)
    return scatter_add(xp, X.shape[0], index, values)


def vertex_normals(xp, X, F, geo: FaceGeometry):
    """Unit normals inside the tangent space of S^3 at each vertex."""
    index = xp.concatenate([F[:, 0], F[:, 1], F[:, 2]], axis=0)
    values = xp.concatenate([geo.normal, geo.normal, geo.normal], axis=0)
    nu = scatter_add(xp, X.shape[0], index, values)
    nu = nu - xp.sum(nu * X, axis=1, keepdims=True) * X
    return nu / xp.sqrt(xp.maximum(xp.sum(nu * nu, axis=1, keepdims=True), TINY))


def mean_curvature(xp, X, F):
    """Returns (H, cell areas, face geometry)."""
    geo = face_geometry(xp, X, F)
    grad = area_gradient_raw(xp, X, F, geo)
    cells = vertex_areas(xp, X, F, geo)
    nu = vertex_normals(xp, X, F, geo)
    H = xp.sum(grad * nu, axis=1) / (2.0 * xp.maximum(cells, TINY))
    return H, cells, geo


def area_value(xp, X, F):
    return xp.sum(face_geometry(xp, X, F).area)


def willmore_value(xp, X, F):
    H, cells, geo = mean_curvature(xp, X, F)
    return xp.sum(geo.area) + xp.sum(H * H * cells)
