import numpy as np

from ..errors import InvalidInputError


def sample_surface(mesh, n, seed):
    """Area-weighted uniform samples on the mesh surface.

    Returns ``(points, face_index, barycentric)``. Faces are drawn with
    probability proportional to area, and positions inside each face use the
    square-root warp so they are uniform over the triangle.
    """
    if len(mesh.faces) == 0:
        raise InvalidInputError("cannot sample an empty mesh")
    if n < 1:
        raise InvalidInputError("sample count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cum = np.cumsum(mesh.face_areas)
    face = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    face = np.minimum(face, len(cum) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    points = points_from_barycentric(mesh, face, bary)
    return points, face, bary


def points_from_barycentric(mesh, face, bary):
    tri = mesh.vertices[mesh.faces[face]]
    return np.einsum("ij,ijk->ik", bary, tri)
