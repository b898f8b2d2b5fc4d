"""Beltrami calculus on piecewise-linear maps.

A map of the mesh is given by one target position per vertex and is affine on
each face, u = a*x + b*y + r, v = c*x + d*y + s.  The complex dilatation
mu = ((a - d) + i(c + b)) / ((a + d) + i(c - b)) measures the local
anisotropic distortion; |mu| < 1 exactly when the face keeps its orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFaceError, InputError
from .geometry import Mesh

#: prescribed magnitudes at or above 1 - MU_CLAMP_EPS are radially pulled in
MU_CLAMP_EPS = 1e-3


def _positions(warp) -> np.ndarray:
    pos = getattr(warp, "positions", warp)
    pos = np.asarray(pos, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise InputError("warp must provide one (x, y) target per vertex", shape=pos.shape)
    return pos


def gradient_coefficients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hat-function gradient weights per face.

    Returns (coef_x, coef_y, areas); a vertex field z has per-face gradient
    (sum_k coef_x[f,k] * z[faces[f,k]], sum_k coef_y[f,k] * z[faces[f,k]]).
    Raises for zero-area source faces: those make the weights meaningless.
    """
    v = mesh.vertices
    f = mesh.faces
    g = v[:, 0][f]
    h = v[:, 1][f]
    doubled = (g[:, 1] - g[:, 0]) * (h[:, 2] - h[:, 0]) - (g[:, 2] - g[:, 0]) * (
        h[:, 1] - h[:, 0]
    )
    scale = mesh.width * mesh.height
    bad = np.flatnonzero(np.abs(doubled) <= 1e-14 * scale)
    if len(bad):
        raise DegenerateFaceError("source faces with zero area", faces=bad[:8].tolist())
    coef_x = np.stack([h[:, 1] - h[:, 2], h[:, 2] - h[:, 0], h[:, 0] - h[:, 1]], axis=1)
    coef_y = np.stack([g[:, 2] - g[:, 1], g[:, 0] - g[:, 2], g[:, 1] - g[:, 0]], axis=1)
    return coef_x / doubled[:, None], coef_y / doubled[:, None], doubled / 2.0


@dataclass(frozen=True, eq=False)
class FaceLinearParts:
    """Per-face affine pieces of a warp: derivatives (a, b, c, d) and the
    translation parts (r, s)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    r: np.ndarray
    s: np.ndarray


def face_linear_parts(mesh: Mesh, warp) -> FaceLinearParts:
    pos = _positions(warp)
    if len(pos) != mesh.n_vertices:
        raise InputError(
            "warp vertex count does not match the mesh",
            warp=len(pos),
            mesh=mesh.n_vertices,
        )
    coef_x, coef_y, _ = gradient_coefficients(mesh)
    u = pos[:, 0][mesh.faces]
    v = pos[:, 1][mesh.faces]
    a = (coef_x * u).sum(axis=1)
    b = (coef_y * u).sum(axis=1)
    c = (coef_x * v).sum(axis=1)
    d = (coef_y * v).sum(axis=1)
    g0 = mesh.vertices[mesh.faces[:, 0], 0]
    h0 = mesh.vertices[mesh.faces[:, 0], 1]
    r = u[:, 0] - a * g0 - b * h0
    s = v[:, 0] - c * g0 - d * h0
    return FaceLinearParts(a=a, b=b, c=c, d=d, r=r, s=s)


@dataclass(frozen=True, eq=False)
class BeltramiField:
    """One complex dilatation value per face."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128))

    @property
    def rho(self) -> np.ndarray:
        return self.values.real

    @property
    def tau(self) -> np.ndarray:
        return self.values.imag

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def clamped(self, eps: float | None = None) -> "BeltramiField":
        """Radially rescale any value with |mu| >= 1 - eps down to 1 - eps, so
        reconstruction always starts from an orientation-preserving field."""
        mag = self.magnitude
        limit = 1.0 - (MU_CLAMP_EPS if eps is None else eps)
        out = self.values.copy()
        hot = mag >= limit
        if np.any(hot):
            out[hot] = out[hot] * (limit / mag[hot])
        return BeltramiField(out)

    @staticmethod
    def constant(value: complex, n_faces: int) -> "BeltramiField":
        return BeltramiField(np.full(n_faces, value, dtype=np.complex128))


def beltrami_of_map(mesh: Mesh, warp) -> BeltramiField:
    parts = face_linear_parts(mesh, warp)
    num = (parts.a - parts.d) + 1j * (parts.c + parts.b)
    den = (parts.a + parts.d) + 1j * (parts.c - parts.b)
    scale = np.sqrt(parts.a**2 + parts.b**2 + parts.c**2 + parts.d**2) + 1e-300
    degenerate = np.flatnonzero(np.abs(den) <= 1e-14 * scale)
    if len(degenerate):
        raise DegenerateFaceError(
            "faces where the dilatation denominator vanishes",
            faces=degenerate[:8].tolist(),
        )
    return BeltramiField(num / den)


def jacobian_of_map(mesh: Mesh, warp) -> np.ndarray:
    """Per-face Jacobian determinant a*d - b*c of the warp."""
    parts = face_linear_parts(mesh, warp)
    return parts.a * parts.d - parts.b * parts.c


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Per-face symmetric 2x2 diffusion matrix [[alpha1, alpha2], [alpha2, alpha3]]."""

    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray

    @property
    def n_faces(self) -> int:
        return len(self.alpha1)

    def is_positive_definite(self) -> np.ndarray:
        return (self.alpha1 > 0) & (self.alpha3 > 0) & (
            self.alpha1 * self.alpha3 - self.alpha2**2 > 0
        )

    @staticmethod
    def identity(n_faces: int) -> "CoefficientField":
        one = np.ones(n_faces)
        return CoefficientField(alpha1=one, alpha2=np.zeros(n_faces), alpha3=one.copy())


def coefficients_from_mu(mu: BeltramiField) -> CoefficientField:
    """Diffusion coefficients of the elliptic system a map with dilatation mu
    satisfies:

        alpha1 = ((rho - 1)^2 + tau^2) / (1 - rho^2 - tau^2)
        alpha2 = -2 tau / (1 - rho^2 - tau^2)
        alpha3 = ((rho + 1)^2 + tau^2) / (1 - rho^2 - tau^2)

    Rejects |mu| >= 1 where the system stops being elliptic.
    """
    rho = mu.rho
    tau = mu.tau
    denom = 1.0 - rho**2 - tau**2
    bad = np.flatnonzero(denom <= 0)
    if len(bad):
        raise InputError(
            "dilatation magnitude >= 1 makes the reconstruction degenerate",
            faces=bad[:8].tolist(),
            max_magnitude=float(mu.magnitude.max()),
        )
    alpha1 = ((rho - 1.0) ** 2 + tau**2) / denom
    alpha2 = -2.0 * tau / denom
    alpha3 = ((rho + 1.0) ** 2 + tau**2) / denom
    return CoefficientField(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3)


@dataclass(frozen=True, eq=False)
class DistortionInfo:
    """Local distortion summary derived from the dilatation.

    angle is NaN where mu = 0 (uniform scaling has no preferred direction).
    """

    angle: np.ndarray
    magnification: np.ndarray
    shrink: np.ndarray

    @property
    def shrink_angle(self) -> np.ndarray:
        return (2.0 * self.angle - np.pi) / 2.0


def distortion_info(mu: BeltramiField) -> DistortionInfo:
    mag = mu.magnitude
    angle = np.angle(mu.values) / 2.0
    angle = np.where(mag == 0, np.nan, angle)
    return DistortionInfo(angle=angle, magnification=1.0 + mag, shrink=1.0 - mag)


def write_mu_table(path, mu: BeltramiField) -> None:
    """Plain-text diagnostic: one row per face with rho, tau, |mu|."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# face rho tau abs_mu\n")
        for i, (r, t, m) in enumerate(zip(mu.rho, mu.tau, mu.magnitude)):
            fh.write(f"{i} {r:.12g} {t:.12g} {m:.12g}\n")
