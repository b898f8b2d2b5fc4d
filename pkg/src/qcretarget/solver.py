"""Constrained reconstruction of a warp from a prescribed dilatation field.

The elliptic system div(A grad f) = 0 is discretized on the triangle mesh:
per-face gradients through hat-function weights, a divergence back onto
vertices weighted by face areas.  Boundary vertices slide along their target
rectangle edge (the coordinate across the edge is pinned, the tangential one
keeps its equation row).  Deformation-type constraints eliminate constrained
vertex coordinates in favor of a handful of scale/translation parameters, and
the resulting overdetermined system is solved in least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .beltrami import CoefficientField, face_linear_parts, gradient_coefficients
from .errors import (
    ConstraintRankWarning,
    FoldoverError,
    InputError,
    SolverError,
)
from .geometry import (
    BoundaryTag,
    Mesh,
    RegionModel,
    merged_intervals,
    on_bottom,
    on_left,
    on_right,
    on_top,
)

#: Tikhonov weight keeping the normal equations factorizable near rank drops
LS_REGULARIZATION = 1e-12
#: refinement sweeps that also strip the regularization bias back out
LS_REFINE_STEPS = 3
#: relative residual bound for the square (direct) solve
DIRECT_RESIDUAL_TOL = 1e-10


def divergence(mesh: Mesh, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Discrete divergence of a per-face vector field, one value per vertex:
    sum over incident faces of area * (wx_i * x1 + wy_i * x2)."""
    coef_x, coef_y, areas = gradient_coefficients(mesh)
    contrib = areas[:, None] * (coef_x * x1[:, None] + coef_y * x2[:, None])
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.faces, contrib)
    return out


def laplacian_matrix(mesh: Mesh, coeffs: CoefficientField) -> sp.csr_matrix:
    """Generalized stiffness operator: row i holds div(A grad phi_n)(v_i).

    With identity coefficients this is the standard piecewise-linear FEM
    Laplacian of the triangulation.
    """
    if coeffs.n_faces != mesh.n_faces:
        raise InputError(
            "coefficient field does not match the mesh",
            coeffs=coeffs.n_faces,
            faces=mesh.n_faces,
        )
    coef_x, coef_y, areas = gradient_coefficients(mesh)
    a1 = coeffs.alpha1[:, None]
    a2 = coeffs.alpha2[:, None]
    a3 = coeffs.alpha3[:, None]
    flux_x = a1 * coef_x + a2 * coef_y  # (F, 3): x-flux from corner n
    flux_y = a2 * coef_x + a3 * coef_y
    # w[f, i, n] = area * (wx_i * flux_x_n + wy_i * flux_y_n)
    w = areas[:, None, None] * (
        coef_x[:, :, None] * flux_x[:, None, :] + coef_y[:, :, None] * flux_y[:, None, :]
    )
    rows = np.repeat(mesh.faces, 3, axis=1).ravel()
    cols = np.tile(mesh.faces, (1, 3)).ravel()
    mat = sp.coo_matrix(
        (w.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    )
    mat.sum_duplicates()
    return mat.tocsr()


# ---------------------------------------------------------------------------
# constraint families


@dataclass(frozen=True)
class ConstraintSet:
    """Vertex groups per constraint family.

    Objects move by one shared uniform scale plus a per-object translation;
    lines by a per-line anisotropic scale plus translation; stripe bands by a
    shared uniform scale with horizontal-only (M_h) or vertical-only (M_v)
    shifts.
    """

    object_groups: tuple[np.ndarray, ...] = ()
    line_groups: tuple[np.ndarray, ...] = ()
    stripe_h_groups: tuple[np.ndarray, ...] = ()
    stripe_v_groups: tuple[np.ndarray, ...] = ()

    @property
    def empty(self) -> bool:
        return not (
            self.object_groups
            or self.line_groups
            or self.stripe_h_groups
            or self.stripe_v_groups
        )


def _vertices_of_faces(mesh: Mesh, faces: set[int]) -> np.ndarray:
    if not faces:
        return np.empty(0, dtype=np.int64)
    idx = np.fromiter(faces, dtype=np.int64)
    return np.unique(mesh.faces[idx].ravel()).astype(np.int64)


def _band_eligible_h(mesh: Mesh) -> np.ndarray:
    """Vertices a horizontal band may claim for its v-substitution: everything
    whose v is not already pinned by the boundary conditions.  Left/right-edge
    vertices keep their Dirichlet u and still join the band in v, so a
    horizontal structure spanning the full width shares one v."""
    return ~np.asarray([_v_dirichlet(t) for t in mesh.boundary_tags])


def _band_eligible_v(mesh: Mesh) -> np.ndarray:
    """Vertices a vertical band may claim for its u-substitution (u not
    pinned).  Claiming the top/bottom-row vertices closes the shear gap
    between the sliding boundary row and the band's frozen u."""
    return ~np.asarray([_u_dirichlet(t) for t in mesh.boundary_tags])


def constraints_from_regions(
    mesh: Mesh, regions: RegionModel, chessboard: bool = False
) -> ConstraintSet:
    """Derive constraint vertex groups from the face-level region model.

    Precedence object > line > stripe keeps every vertex in at most one group
    per coordinate.  Rectangle-boundary vertices never join a stripe group:
    their coordinates belong to the boundary conditions, and a band pinned to
    both verdicts would make the system structurally inconsistent.
    """
    claimed: set[int] = set()
    object_groups: list[np.ndarray] = []
    for faces in regions.object_faces:
        verts = _vertices_of_faces(mesh, set(faces))
        verts = np.asarray([v for v in verts if v not in claimed], dtype=np.int64)
        if len(verts) == 0:
            continue
        claimed.update(verts.tolist())
        object_groups.append(verts)

    line_groups: list[np.ndarray] = []
    for faces in regions.line_faces:
        verts = _vertices_of_faces(mesh, set(faces))
        verts = np.asarray([v for v in verts if v not in claimed], dtype=np.int64)
        if len(verts) == 0:
            warnings.warn(
                "line group fully absorbed by object regions",
                ConstraintRankWarning,
                stacklevel=2,
            )
            continue
        claimed.update(verts.tolist())
        line_groups.append(verts)

    stripe_h_groups: list[np.ndarray] = []
    stripe_v_groups: list[np.ndarray] = []
    if chessboard and regions.object_bounds:
        fb = mesh.face_bounds()
        eligible_h = _band_eligible_h(mesh)
        eligible_v = _band_eligible_v(mesh)
        taken_h: set[int] = set()
        for y0, y1 in merged_intervals([(b[2], b[3]) for b in regions.object_bounds]):
            faces = np.flatnonzero((fb[:, 2] < y1) & (fb[:, 3] > y0))
            verts = np.unique(mesh.faces[faces].ravel())
            keep = [
                int(v)
                for v in verts
                if eligible_h[v] and v not in claimed and v not in taken_h
            ]
            if keep:
                taken_h.update(keep)
                stripe_h_groups.append(np.asarray(keep, dtype=np.int64))
        taken_v: set[int] = set()
        for x0, x1 in merged_intervals([(b[0], b[1]) for b in regions.object_bounds]):
            faces = np.flatnonzero((fb[:, 0] < x1) & (fb[:, 1] > x0))
            verts = np.unique(mesh.faces[faces].ravel())
            keep = [
                int(v)
                for v in verts
                if eligible_v[v] and v not in claimed and v not in taken_v
            ]
            if keep:
                taken_v.update(keep)
                stripe_v_groups.append(np.asarray(keep, dtype=np.int64))

    return ConstraintSet(
        object_groups=tuple(object_groups),
        line_groups=tuple(line_groups),
        stripe_h_groups=tuple(stripe_h_groups),
        stripe_v_groups=tuple(stripe_v_groups),
    )


# ---------------------------------------------------------------------------
# staged system assembly

Terms = tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class _Plan:
    """Everything needed to materialize the linear system at any stage."""

    mesh: Mesh
    operator: sp.csr_matrix
    target_dims: tuple[float, float] | None = None
    sub_u: dict[int, Terms] = field(default_factory=dict)
    sub_v: dict[int, Terms] = field(default_factory=dict)
    params: tuple[str, ...] = ()
    object_count: int = 0
    line_count: int = 0
    band_h_count: int = 0
    band_v_count: int = 0


@dataclass(eq=False)
class SparseSystem:
    """Triplet view of the current stage plus the plan that produced it."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    rhs: np.ndarray
    plan: _Plan = field(repr=False, default=None)

    def matrix(self) -> sp.csr_matrix:
        mat = sp.coo_matrix(
            (self.values, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols)
        )
        return mat.tocsr()

    def dump(self, path) -> None:
        """Plain-text triplets followed by the right-hand side."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# rows {self.n_rows} cols {self.n_cols}\n")
            for r, c, v in zip(self.rows, self.cols, self.values):
                fh.write(f"{r} {c} {v:.17g}\n")
            fh.write("# rhs\n")
            for r, v in enumerate(self.rhs):
                fh.write(f"{r} {v:.17g}\n")


def _u_dirichlet(tag: int) -> bool:
    return on_left(tag) or on_right(tag)


def _v_dirichlet(tag: int) -> bool:
    return on_bottom(tag) or on_top(tag)


def _boundary_value_u(tag: int, m_target: float) -> float:
    return m_target if on_right(tag) else 0.0


def _boundary_value_v(tag: int, n_target: float) -> float:
    return n_target if on_top(tag) else 0.0


def _expression_matrix(
    plan: _Plan,
    sub: dict[int, Terms],
    free_cols: dict[int, int],
    param_col0: int,
    n_cols: int,
    pinned: dict[int, float],
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse N x n_cols matrix E and constant vector e0 so that the full
    coordinate vector equals E @ unknowns + e0."""
    n = plan.mesh.n_vertices
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    e0 = np.zeros(n)
    for i in range(n):
        if i in sub:
            for p, coeff in sub[i]:
                rows.append(i)
                cols.append(param_col0 + p)
                vals.append(coeff)
        elif i in pinned:
            e0[i] = pinned[i]
        else:
            rows.append(i)
            cols.append(free_cols[i])
            vals.append(1.0)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n_cols)).tocsr()
    return mat, e0


def _build(plan: _Plan, eliminate_pinned: bool):
    """Materialize the system.

    eliminate_pinned=False keeps Dirichlet-pinned coordinates as unknowns with
    identity rows (the literal square form); True replaces them by constants,
    which makes the boundary exact even in least-squares mode.
    """
    mesh = plan.mesh
    n = mesh.n_vertices
    tags = mesh.boundary_tags
    has_bc = plan.target_dims is not None

    pinned_u: dict[int, float] = {}
    pinned_v: dict[int, float] = {}
    if has_bc and eliminate_pinned:
        m_t, n_t = plan.target_dims
        for i in range(n):
            tag = tags[i]
            if _u_dirichlet(tag) and i not in plan.sub_u:
                pinned_u[i] = _boundary_value_u(tag, m_t)
            if _v_dirichlet(tag) and i not in plan.sub_v:
                pinned_v[i] = _boundary_value_v(tag, n_t)

    free_u = {
        i: k
        for k, i in enumerate(
            i for i in range(n) if i not in plan.sub_u and i not in pinned_u
        )
    }
    off_v = len(free_u)
    free_v = {
        i: off_v + k
        for k, i in enumerate(
            i for i in range(n) if i not in plan.sub_v and i not in pinned_v
        )
    }
    param_col0 = off_v + len(free_v)
    n_cols = param_col0 + len(plan.params)

    e_u, e0_u = _expression_matrix(plan, plan.sub_u, free_u, param_col0, n_cols, pinned_u)
    e_v, e0_v = _expression_matrix(plan, plan.sub_v, free_v, param_col0, n_cols, pinned_v)

    op = plan.operator
    if has_bc:
        pde_u = np.asarray([i for i in range(n) if not _u_dirichlet(tags[i])], dtype=np.int64)
        pde_v = np.asarray([i for i in range(n) if not _v_dirichlet(tags[i])], dtype=np.int64)
    else:
        inter = mesh.interior_vertices().astype(np.int64)
        pde_u = inter
        pde_v = inter

    blocks = []
    rhs_parts = []
    op_u = op[pde_u]
    blocks.append(op_u @ e_u)
    rhs_parts.append(-(op_u @ e0_u))
    op_v = op[pde_v]
    blocks.append(op_v @ e_v)
    rhs_parts.append(-(op_v @ e0_v))

    if has_bc:
        m_t, n_t = plan.target_dims
        dir_u = [i for i in range(n) if _u_dirichlet(tags[i]) and i not in pinned_u]
        dir_v = [i for i in range(n) if _v_dirichlet(tags[i]) and i not in pinned_v]
        if dir_u:
            blocks.append(e_u[dir_u])
            rhs_parts.append(np.asarray([_boundary_value_u(tags[i], m_t) for i in dir_u]))
        if dir_v:
            blocks.append(e_v[dir_v])
            rhs_parts.append(np.asarray([_boundary_value_v(tags[i], n_t) for i in dir_v]))

    mat = sp.vstack(blocks, format="csr")
    rhs = np.concatenate(rhs_parts) if rhs_parts else np.zeros(0)
    return mat, rhs, e_u, e_v, e0_u, e0_v, n_cols


def _system_from_plan(plan: _Plan) -> SparseSystem:
    mat, rhs, *_ = _build(plan, eliminate_pinned=False)
    coo = mat.tocoo()
    coo.sum_duplicates()
    return SparseSystem(
        n_rows=mat.shape[0],
        n_cols=mat.shape[1],
        rows=coo.row.copy(),
        cols=coo.col.copy(),
        values=coo.data.copy(),
        rhs=rhs,
        plan=plan,
    )


def assemble_laplacian(mesh: Mesh, coeffs: CoefficientField) -> SparseSystem:
    """Equation rows div(A grad f)(v_i) = 0 for every interior vertex, one
    block per coordinate over the same stencil."""
    bad = np.flatnonzero(~coeffs.is_positive_definite())
    if len(bad):
        raise InputError(
            "coefficient field is not positive definite",
            faces=bad[:8].tolist(),
        )
    op = laplacian_matrix(mesh, coeffs)
    return _system_from_plan(_Plan(mesh=mesh, operator=op))


def apply_boundary_conditions(
    system: SparseSystem, mesh: Mesh, target_dims: tuple[float, float]
) -> SparseSystem:
    """Pin coordinates across each edge, keep sliding along it.

    u is fixed to 0 / m' on the left / right edges, v to 0 / n' on the bottom
    / top; the tangential coordinate of a non-corner edge vertex keeps its
    equation row, corners are fully pinned.
    """
    m_t, n_t = float(target_dims[0]), float(target_dims[1])
    if not (m_t > 0 and n_t > 0):
        raise InputError("target dimensions must be positive", dims=target_dims)
    if system.plan.mesh is not mesh:
        raise InputError("boundary conditions must use the assembling mesh")
    plan = replace(system.plan, target_dims=(m_t, n_t))
    return _system_from_plan(plan)


def _warn_if_rank_deficient(kind: str, index: int, verts: np.ndarray, mesh: Mesh) -> None:
    pts = mesh.vertices[verts]
    distinct_x = len(np.unique(pts[:, 0]))
    distinct_y = len(np.unique(pts[:, 1]))
    if len(verts) < 3 or distinct_x < 2 or distinct_y < 2:
        warnings.warn(
            f"{kind} group {index} is too small or collinear to pin its scale; "
            "the least-squares solve will pick the minimum-norm parameters",
            ConstraintRankWarning,
            stacklevel=3,
        )


def augment_deformation_constraints(
    system: SparseSystem, constraints: ConstraintSet, mesh: Mesh
) -> SparseSystem:
    """Substitute object vertices by r_o * v + t_i (one shared scale) and line
    vertices by (rx_j * x, ry_j * y) + t_j, adding those parameters as
    unknowns while keeping every equation row."""
    plan = system.plan
    if plan.target_dims is None:
        raise SolverError("apply boundary conditions before adding constraints")
    n = mesh.n_vertices
    sub_u = dict(plan.sub_u)
    sub_v = dict(plan.sub_v)
    params = list(plan.params)

    def add_param(name: str) -> int:
        params.append(name)
        return len(params) - 1

    groups = [g for g in constraints.object_groups if len(g)]
    shared_scale = add_param("object_scale") if groups else None
    for gi, verts in enumerate(groups):
        bad = verts[(verts < 0) | (verts >= n)]
        if len(bad):
            raise InputError("constraint vertices outside the mesh", vertices=bad.tolist())
        _warn_if_rank_deficient("object", gi, verts, mesh)
        tx = add_param(f"object_tx_{gi}")
        ty = add_param(f"object_ty_{gi}")
        for v in verts.tolist():
            if v in sub_u or v in sub_v:
                continue
            g, h = mesh.vertices[v]
            sub_u[v] = ((shared_scale, float(g)), (tx, 1.0))
            sub_v[v] = ((shared_scale, float(h)), (ty, 1.0))

    line_groups = [g for g in constraints.line_groups if len(g)]
    for gi, verts in enumerate(line_groups):
        bad = verts[(verts < 0) | (verts >= n)]
        if len(bad):
            raise InputError("constraint vertices outside the mesh", vertices=bad.tolist())
        _warn_if_rank_deficient("line", gi, verts, mesh)
        rx = add_param(f"line_rx_{gi}")
        ry = add_param(f"line_ry_{gi}")
        tx = add_param(f"line_tx_{gi}")
        ty = add_param(f"line_ty_{gi}")
        for v in verts.tolist():
            if v in sub_u or v in sub_v:
                continue
            g, h = mesh.vertices[v]
            sub_u[v] = ((rx, float(g)), (tx, 1.0))
            sub_v[v] = ((ry, float(h)), (ty, 1.0))

    if len(sub_u) >= n or len(sub_v) >= n:
        raise InputError("every vertex is constrained; nothing left to solve for")

    plan = replace(
        plan,
        sub_u=sub_u,
        sub_v=sub_v,
        params=tuple(params),
        object_count=len(groups),
        line_count=len(line_groups),
    )
    return _system_from_plan(plan)


def augment_chessboard_constraints(
    system: SparseSystem, constraints: ConstraintSet, mesh: Mesh
) -> SparseSystem:
    """Stripe bands share one scale r.  A horizontal band freezes the cross
    coordinate, v = r*y + d_i, so every horizontal structure in it keeps a
    single v; a vertical band freezes u = r*x + e_j; vertices in both bands
    are fully pinned to r*x + (e_j, d_i).

    The coordinate running along a band stays free: freezing u across a
    full-width band would force the band width to r*m, which cannot fit the
    squeezed target whenever r lands above the width ratio, and the solve
    then folds at the band ends.  Only the cross coordinates (which carry the
    axis-preservation guarantee) are pinned; the per-band translations d_i,
    e_j keep the placement feasible at every ratio.
    """
    plan = system.plan
    if plan.target_dims is None:
        raise SolverError("apply boundary conditions before adding constraints")
    h_groups = [g for g in constraints.stripe_h_groups if len(g)]
    v_groups = [g for g in constraints.stripe_v_groups if len(g)]
    if not h_groups and not v_groups:
        raise InputError("chessboard constraints requested but both stripe families are empty")
    if bool(h_groups) != bool(v_groups):
        raise InputError(
            "chessboard constraints need both stripe families",
            horizontal=len(h_groups),
            vertical=len(v_groups),
        )
    sub_u = dict(plan.sub_u)
    sub_v = dict(plan.sub_v)
    params = list(plan.params)
    deformation_claimed = set(sub_u) | set(sub_v)

    def add_param(name: str) -> int:
        params.append(name)
        return len(params) - 1

    r = add_param("band_scale")
    for gi, verts in enumerate(h_groups):
        dy = add_param(f"band_shift_y_{gi}")
        for v in verts.tolist():
            if v in deformation_claimed:  # object/line claims win
                continue
            h = mesh.vertices[v, 1]
            sub_v[v] = ((r, float(h)), (dy, 1.0))
    for gi, verts in enumerate(v_groups):
        ex = add_param(f"band_shift_x_{gi}")
        for v in verts.tolist():
            if v in deformation_claimed:
                continue
            g = mesh.vertices[v, 0]
            sub_u[v] = ((r, float(g)), (ex, 1.0))

    if len(sub_u) >= mesh.n_vertices or len(sub_v) >= mesh.n_vertices:
        raise InputError("every vertex is constrained; nothing left to solve for")

    plan = replace(
        plan,
        sub_u=sub_u,
        sub_v=sub_v,
        params=tuple(params),
        band_h_count=len(h_groups),
        band_v_count=len(v_groups),
    )
    return _system_from_plan(plan)


# ---------------------------------------------------------------------------
# solve


@dataclass(frozen=True)
class RecoveredParams:
    object_scale: float | None = None
    object_translations: tuple[tuple[float, float], ...] = ()
    line_scales: tuple[tuple[float, float], ...] = ()
    line_translations: tuple[tuple[float, float], ...] = ()
    band_scale: float | None = None
    band_shifts_x: tuple[float, ...] = ()
    band_shifts_y: tuple[float, ...] = ()


@dataclass(eq=False)
class WarpField:
    """Solved warp: one target position per vertex plus recovered parameters."""

    positions: np.ndarray
    target_dims: tuple[float, float]
    params: RecoveredParams
    residual: float
    min_jacobian: float
    micro_folds_repaired: int = 0


def _extract_params(names: tuple[str, ...], values: np.ndarray) -> RecoveredParams:
    by_name = dict(zip(names, values.tolist()))
    object_scale = by_name.get("object_scale")
    obj_t = []
    k = 0
    while f"object_tx_{k}" in by_name:
        obj_t.append((by_name[f"object_tx_{k}"], by_name[f"object_ty_{k}"]))
        k += 1
    line_s = []
    line_t = []
    k = 0
    while f"line_rx_{k}" in by_name:
        line_s.append((by_name[f"line_rx_{k}"], by_name[f"line_ry_{k}"]))
        line_t.append((by_name[f"line_tx_{k}"], by_name[f"line_ty_{k}"]))
        k += 1
    band_scale = by_name.get("band_scale")
    shifts_x = []
    k = 0
    while f"band_shift_x_{k}" in by_name:
        shifts_x.append(by_name[f"band_shift_x_{k}"])
        k += 1
    shifts_y = []
    k = 0
    while f"band_shift_y_{k}" in by_name:
        shifts_y.append(by_name[f"band_shift_y_{k}"])
        k += 1
    return RecoveredParams(
        object_scale=object_scale,
        object_translations=tuple(obj_t),
        line_scales=tuple(line_s),
        line_translations=tuple(line_t),
        band_scale=band_scale,
        band_shifts_x=tuple(shifts_x),
        band_shifts_y=tuple(shifts_y),
    )


def _solve_free_given_params(plan: _Plan, param_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact square solve of the free coordinates once every substituted
    coordinate is a known constant."""
    mesh = plan.mesh
    n = mesh.n_vertices
    tags = mesh.boundary_tags
    m_t, n_t = plan.target_dims
    op = plan.operator

    def solve_coord(sub: dict[int, Terms], dirichlet, boundary_value) -> np.ndarray:
        known = np.zeros(n)
        is_known = np.zeros(n, dtype=bool)
        for i, terms in sub.items():
            known[i] = sum(coeff * param_values[p] for p, coeff in terms)
            is_known[i] = True
        for i in range(n):
            if dirichlet(tags[i]) and not is_known[i]:
                known[i] = boundary_value(tags[i])
                is_known[i] = True
        free = np.flatnonzero(~is_known)
        col_of = {int(i): k for k, i in enumerate(free)}
        rows = [int(i) for i in free if not dirichlet(tags[i])]
        # every free vertex is either interior or sliding, so this is square
        sel = op[rows]
        coo = sel.tocoo()
        keep = ~is_known[coo.col]
        mat = sp.coo_matrix(
            (coo.data[keep], (coo.row[keep], [col_of[int(c)] for c in coo.col[keep]])),
            shape=(len(rows), len(free)),
        ).tocsr()
        rhs = -(sel @ known)
        out = known.copy()
        out[free] = spla.spsolve(mat.tocsc(), rhs)
        return out

    u = solve_coord(plan.sub_u, _u_dirichlet, lambda t: _boundary_value_u(t, m_t))
    v = solve_coord(plan.sub_v, _v_dirichlet, lambda t: _boundary_value_v(t, n_t))
    return u, v


#: folded faces whose warped area stays below this are sub-resolution slivers
MICRO_FOLD_AREA = 0.5


def _pava_nondecreasing(values: list[float]) -> list[float]:
    """Pool-adjacent-violators projection onto nondecreasing sequences."""
    vals: list[float] = []
    counts: list[int] = []
    for v in values:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            merged = (vals[-1] * counts[-1] + vals[-2] * counts[-2]) / (
                counts[-1] + counts[-2]
            )
            counts[-2] += counts[-1]
            vals[-2] = merged
            vals.pop()
            counts.pop()
    out: list[float] = []
    for v, c in zip(vals, counts):
        out.extend([v] * c)
    return out


def _monotone_project(values: np.ndarray, adjustable: np.ndarray) -> np.ndarray:
    """Make the sequence nondecreasing by moving only adjustable entries;
    fixed entries act as hard anchors.  If the anchors themselves are out of
    order the segment is left alone (a genuine fold, not sliver noise)."""
    out = values.astype(float).copy()
    anchors = np.flatnonzero(~adjustable)
    prev_val = -np.inf
    prev_idx = 0
    segments = []
    for a in anchors:
        segments.append((prev_idx, int(a), prev_val, out[a]))
        prev_val = out[a]
        prev_idx = int(a) + 1
    segments.append((prev_idx, len(out), prev_val, np.inf))
    scale = float(np.abs(values[np.isfinite(values)]).max()) if len(values) else 1.0
    eps = 1e-12 * max(1.0, scale)
    for lo_i, hi_i, lo_v, hi_v in segments:
        if hi_i <= lo_i:
            continue
        if hi_v < lo_v:  # inverted anchors: not repairable here
            continue
        seg = np.asarray(_pava_nondecreasing(list(np.clip(out[lo_i:hi_i], lo_v, hi_v))))
        # spread exact ties a hair apart so no face degenerates to zero area
        prev = lo_v
        for k in range(len(seg)):
            if np.isfinite(prev):
                seg[k] = max(seg[k], prev + eps)
            prev = seg[k]
        if np.isfinite(hi_v) and len(seg) and seg[-1] > hi_v - eps:
            nxt = hi_v
            for k in range(len(seg) - 1, -1, -1):
                seg[k] = min(seg[k], nxt - eps)
                nxt = seg[k]
            if np.isfinite(lo_v) and seg[0] < lo_v:
                continue  # segment too packed to strictify; leave it alone
        out[lo_i:hi_i] = seg
    return out


def _repair_micro_folds(
    plan: _Plan, positions: np.ndarray, jacobians: np.ndarray
) -> np.ndarray | None:
    """Sub-resolution fold repair.

    The exact warp for an admissible field is injective, but in regions the
    prescription collapses to sub-pixel width the discrete solution can carry
    coordinate inversions of a few thousandths of a pixel.  Those are
    projected back onto monotone order along grid rows (u) and columns (v),
    moving free coordinates only.  Returns None when any folded face is
    larger than a sliver; callers must re-validate the result.
    """
    mesh = plan.mesh
    folded = np.flatnonzero(jacobians <= 0)
    warped_area = jacobians[folded] * mesh.signed_areas()[folded]
    if np.abs(warped_area).max() > MICRO_FOLD_AREA:
        return None
    p, q = mesh.grid
    tags = mesh.boundary_tags
    pos = positions.copy()
    affected = set(int(v) for v in mesh.faces[folded].ravel())
    rows = sorted({v // (p + 1) for v in affected})
    cols = sorted({v % (p + 1) for v in affected})
    for j in rows:
        ids = np.asarray([j * (p + 1) + i for i in range(p + 1)])
        adjustable = np.asarray(
            [i not in plan.sub_u and not _u_dirichlet(tags[i]) for i in ids]
        )
        pos[ids, 0] = _monotone_project(pos[ids, 0], adjustable)
    for i in cols:
        ids = np.asarray([j * (p + 1) + i for j in range(q + 1)])
        adjustable = np.asarray(
            [k not in plan.sub_v and not _v_dirichlet(tags[k]) for k in ids]
        )
        pos[ids, 1] = _monotone_project(pos[ids, 1], adjustable)
    return pos


def _full_residual(plan: _Plan, u: np.ndarray, v: np.ndarray) -> float:
    """Norm of every equation row evaluated at the final coordinates, relative
    to the boundary data scale."""
    mesh = plan.mesh
    tags = mesh.boundary_tags
    m_t, n_t = plan.target_dims
    op = plan.operator
    pde_u = [i for i in range(mesh.n_vertices) if not _u_dirichlet(tags[i])]
    pde_v = [i for i in range(mesh.n_vertices) if not _v_dirichlet(tags[i])]
    parts = [op[pde_u] @ u, op[pde_v] @ v]
    parts.append(
        np.asarray(
            [u[i] - _boundary_value_u(tags[i], m_t) for i in range(mesh.n_vertices) if _u_dirichlet(tags[i])]
        )
    )
    parts.append(
        np.asarray(
            [v[i] - _boundary_value_v(tags[i], n_t) for i in range(mesh.n_vertices) if _v_dirichlet(tags[i])]
        )
    )
    num = float(np.linalg.norm(np.concatenate(parts)))
    scale = float(np.hypot(m_t, n_t))
    return num / max(scale, 1e-300)


def solve(system: SparseSystem) -> WarpField:
    """Direct solve when square, least squares otherwise; validates that the
    solved warp keeps every face positively oriented."""
    plan = system.plan
    if plan is None or plan.target_dims is None:
        raise SolverError("system lacks boundary conditions; assemble and apply them first")
    mat, rhs, e_u, e_v, e0_u, e0_v, n_cols = _build(plan, eliminate_pinned=True)
    if mat.shape[0] < n_cols:
        raise SolverError(
            "fewer equations than unknowns",
            rows=mat.shape[0],
            cols=n_cols,
        )

    rhs_norm = float(np.linalg.norm(rhs))
    if not plan.params and mat.shape[0] == mat.shape[1]:
        try:
            x = spla.spsolve(mat.tocsc(), rhs)
        except RuntimeError as exc:  # pragma: no cover - singular grids
            raise SolverError(f"direct solve failed: {exc}") from exc
        residual = float(np.linalg.norm(mat @ x - rhs)) / max(rhs_norm, 1e-300)
        if not np.all(np.isfinite(x)) or residual > DIRECT_RESIDUAL_TOL:
            raise SolverError(
                "direct solve did not reach the required residual",
                residual=residual,
                tolerance=DIRECT_RESIDUAL_TOL,
            )
    else:
        # column equilibration keeps the normal equations well conditioned
        # when the coefficient field is strongly anisotropic; it rescales the
        # unknowns only, so the least-squares minimizer is unchanged
        col_norms = np.sqrt(np.asarray(mat.power(2).sum(axis=0)).ravel())
        col_scale = 1.0 / np.maximum(col_norms, 1e-30)
        scaling = sp.diags(col_scale)
        scaled = (mat @ scaling).tocsr()
        gram = (scaled.T @ scaled).tocsc() + LS_REGULARIZATION * sp.identity(
            n_cols, format="csc"
        )
        try:
            factor = spla.splu(gram)
        except RuntimeError as exc:
            raise SolverError(
                "normal equations are singular; a constraint group is likely "
                "degenerate (single vertex or collinear)",
                params=list(plan.params),
            ) from exc
        y = factor.solve(scaled.T @ rhs)
        for _ in range(LS_REFINE_STEPS):
            y = y + factor.solve(scaled.T @ (rhs - scaled @ y))
        x = col_scale * y
        if not np.all(np.isfinite(x)):
            raise SolverError("least-squares solve produced non-finite values")
        residual = float(np.linalg.norm(mat @ x - rhs)) / max(rhs_norm, 1e-300)

    n_params = len(plan.params)
    values = x[n_cols - n_params :] if n_params else np.zeros(0)
    params = _extract_params(plan.params, values)

    if n_params:
        # polish pass: with the parameters fixed, the free coordinates have a
        # square elliptic system again; solving it exactly removes the small
        # least-squares wiggles that can micro-fold collapsed regions
        u, v = _solve_free_given_params(plan, values)
        positions = np.column_stack([u, v])
        residual = _full_residual(plan, u, v)
    else:
        u = e_u @ x + e0_u
        v = e_v @ x + e0_v
        positions = np.column_stack([u, v])

    def jacobians(pos: np.ndarray) -> np.ndarray:
        parts = face_linear_parts(plan.mesh, pos)
        return parts.a * parts.d - parts.b * parts.c

    jac = jacobians(positions)
    repaired = 0
    if jac.min() <= 0:
        fixed = _repair_micro_folds(plan, positions, jac)
        if fixed is not None:
            new_jac = jacobians(fixed)
            if new_jac.min() > 0:
                repaired = int(np.count_nonzero(jac <= 0))
                positions = fixed
                jac = new_jac
    min_jac = float(jac.min())
    warp = WarpField(
        positions=positions,
        target_dims=plan.target_dims,
        params=params,
        residual=residual,
        min_jacobian=min_jac,
        micro_folds_repaired=repaired,
    )
    if min_jac <= 0:
        folded = np.flatnonzero(jac <= 0)
        raise FoldoverError(
            "solved warp folds over",
            faces=folded[:32].tolist(),
            warp=warp,
            min_jacobian=min_jac,
        )
    return warp
