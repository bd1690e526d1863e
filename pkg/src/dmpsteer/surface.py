"""Tensor-product B-spline surfaces and the geometry queries built on them.

Supplies points r(u, v) = sum_ij N_ik(u) N_jl(v) p_ij, normals from the
cross product of the parameter tangents, hybrid-control frames, the
operator-input rotation frame derived from the closest-fit plane to the
control net, and closest-point projections used by segment transitions.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

DEGENERATE_TANGENT_GUARD = 1e-10
PROJECT_GRID = 32
PROJECT_MAX_ITERS = 50
PROJECT_TOL = 1e-8
EDGE_MARGIN_DEFAULT = 0.005


class PlaneFitError(RuntimeError):
    """Simplex stagnated; carries the best iterate and its objective."""

    def __init__(self, msg: str, best: np.ndarray, objective: float):
        super().__init__(msg)
        self.best = best
        self.objective = objective


# ---------------------------------------------------------------------------
# basis functions (clamped knot vectors)


def clamped_uniform_knots(n_ctrl: int, degree: int) -> np.ndarray:
    if n_ctrl <= degree:
        raise ValueError("need more control points than the degree")
    n_internal = n_ctrl - degree - 1
    internal = np.linspace(0.0, 1.0, n_internal + 2)[1:-1]
    return np.concatenate([np.zeros(degree + 1), internal, np.ones(degree + 1)])


def find_span(knots, degree: int, n_ctrl: int, t: float) -> int:
    if t >= knots[n_ctrl]:
        return n_ctrl - 1
    if t <= knots[degree]:
        return degree
    return bisect_right(knots, t, degree, n_ctrl) - 1


def basis_funs(knots, degree: int, span: int, t: float) -> list[float]:
    """The degree+1 nonzero basis values at t (Cox-de Boor, span-local)."""
    N = [1.0] * (degree + 1)
    left = [0.0] * (degree + 1)
    right = [0.0] * (degree + 1)
    for j in range(1, degree + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    return N


def basis_and_derivs(knots, degree: int, span: int, t: float):
    """Nonzero basis values and first derivatives at t."""
    ndu = [[0.0] * (degree + 1) for _ in range(degree + 1)]
    ndu[0][0] = 1.0
    left = [0.0] * (degree + 1)
    right = [0.0] * (degree + 1)
    for j in range(1, degree + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            ndu[j][r] = right[r + 1] + left[j - r]
            temp = ndu[r][j - 1] / ndu[j][r]
            ndu[r][j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j][j] = saved

    N = [ndu[j][degree] for j in range(degree + 1)]
    dN = [0.0] * (degree + 1)
    for r in range(degree + 1):
        d = 0.0
        if r >= 1:
            d += ndu[r - 1][degree - 1] / ndu[degree][r - 1]
        if r <= degree - 1:
            d -= ndu[r][degree - 1] / ndu[degree][r]
        dN[r] = d * degree
    return N, dN


def basis_row(knots, degree: int, n_ctrl: int, t: float) -> np.ndarray:
    """Full-length basis vector (zeros outside the active span)."""
    row = np.zeros(n_ctrl)
    span = find_span(knots, degree, n_ctrl, t)
    row[span - degree : span + 1] = basis_funs(knots, degree, span, t)
    return row


def basis_value_recursive(knots, degree: int, i: int, t: float) -> float:
    """Textbook Cox-de Boor recursion for one basis function (oracle path)."""
    if degree == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        # closed right end of the domain
        if t == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
            return 1.0
        return 0.0
    out = 0.0
    den1 = knots[i + degree] - knots[i]
    if den1 > 0:
        out += (t - knots[i]) / den1 * basis_value_recursive(knots, degree - 1, i, t)
    den2 = knots[i + degree + 1] - knots[i + 1]
    if den2 > 0:
        out += (knots[i + degree + 1] - t) / den2 * basis_value_recursive(
            knots, degree - 1, i + 1, t
        )
    return out


# ---------------------------------------------------------------------------
# surface


def clamp_params(u: float, v: float, margin: float = 0.0) -> tuple[float, float]:
    """Clamp parameters into [margin, 1 - margin]."""
    lo, hi = margin, 1.0 - margin
    return (min(max(u, lo), hi), min(max(v, lo), hi))


@dataclass(frozen=True)
class SurfaceFrame:
    origin: np.ndarray
    normal: np.ndarray
    t_u: np.ndarray
    t_v: np.ndarray


@dataclass(frozen=True)
class PlaneFit:
    """Closest-fit plane in exponential coordinates plus the input frame."""

    w: np.ndarray  # [w_x, w_y, 0]
    d: float
    rotation: np.ndarray  # R_input, columns (t_u, t_v, n)
    objective: float  # sum of squared signed distances
    linear_objective: float  # the unsquared projected-residual sum, reported
    normal: np.ndarray = field(default=None)


class BSplineSurface:
    """Clamped tensor-product B-spline patch over [0,1]^2 (meters)."""

    def __init__(self, degrees, knots_u, knots_v, control_points, normal_side: int = 1):
        self.degree_u, self.degree_v = int(degrees[0]), int(degrees[1])
        self.knots_u = np.asarray(knots_u, dtype=float)
        self.knots_v = np.asarray(knots_v, dtype=float)
        # canonical layout: evaluation must be bit-reproducible regardless of
        # whether the grid came from a fit (transposed view) or a file
        self.control_points = np.ascontiguousarray(np.asarray(control_points, dtype=float))
        self.normal_side = 1 if normal_side >= 0 else -1
        self._validate()
        self._ku = self.knots_u.tolist()
        self._kv = self.knots_v.tolist()

    def _validate(self):
        if self.degree_u < 1 or self.degree_v < 1:
            raise ValueError("degrees must be >= 1")
        P = self.control_points
        if P.ndim != 3 or P.shape[2] != 3:
            raise ValueError("control points must be an (nu, nv, 3) grid")
        nu, nv = P.shape[:2]
        for name, knots, degree, n in (
            ("knots_u", self.knots_u, self.degree_u, nu),
            ("knots_v", self.knots_v, self.degree_v, nv),
        ):
            if len(knots) != n + degree + 1:
                raise ValueError(
                    f"{name}: expected {n + degree + 1} knots for {n} control points "
                    f"of degree {degree}, got {len(knots)}"
                )
            d = np.diff(knots)
            bad = np.where(d < 0)[0]
            if bad.size:
                raise ValueError(f"{name} not non-decreasing at index {int(bad[0])}")
            if not (np.all(knots[: degree + 1] == knots[0]) and np.all(knots[-(degree + 1) :] == knots[-1])):
                raise ValueError(f"{name} is not clamped (end multiplicity {degree + 1})")
        for i in range(nu - 1):
            if np.array_equal(P[i], P[i + 1]):
                raise ValueError(f"degenerate control net: rows {i} and {i + 1} identical")
        for j in range(nv - 1):
            if np.array_equal(P[:, j], P[:, j + 1]):
                raise ValueError(f"degenerate control net: columns {j} and {j + 1} identical")

    @property
    def n_ctrl(self) -> tuple[int, int]:
        return self.control_points.shape[0], self.control_points.shape[1]

    def _clamp_domain(self, u: float, v: float) -> tuple[float, float]:
        return clamp_params(float(u), float(v), 0.0)

    def eval(self, u: float, v: float) -> np.ndarray:
        u, v = self._clamp_domain(u, v)
        nu, nv = self.n_ctrl
        su = find_span(self._ku, self.degree_u, nu, u)
        sv = find_span(self._kv, self.degree_v, nv, v)
        Nu = basis_funs(self._ku, self.degree_u, su, u)
        Nv = basis_funs(self._kv, self.degree_v, sv, v)
        block = self.control_points[su - self.degree_u : su + 1, sv - self.degree_v : sv + 1]
        return np.einsum("i,j,ijc->c", Nu, Nv, block)

    def eval_with_tangents(self, u: float, v: float):
        """Point and the two parameter tangents dr/du, dr/dv."""
        u, v = self._clamp_domain(u, v)
        nu, nv = self.n_ctrl
        su = find_span(self._ku, self.degree_u, nu, u)
        sv = find_span(self._kv, self.degree_v, nv, v)
        Nu, dNu = basis_and_derivs(self._ku, self.degree_u, su, u)
        Nv, dNv = basis_and_derivs(self._kv, self.degree_v, sv, v)
        block = self.control_points[su - self.degree_u : su + 1, sv - self.degree_v : sv + 1]
        point = np.einsum("i,j,ijc->c", Nu, Nv, block)
        du = np.einsum("i,j,ijc->c", dNu, Nv, block)
        dv = np.einsum("i,j,ijc->c", Nu, dNv, block)
        return point, du, dv

    def normal(self, u: float, v: float) -> np.ndarray:
        _, du, dv = self.eval_with_tangents(u, v)
        n = np.cross(du, dv)
        norm = np.linalg.norm(n)
        if norm < DEGENERATE_TANGENT_GUARD:
            raise ValueError(f"degenerate parameterization at ({u}, {v})")
        return self.normal_side * n / norm

    def frame(self, u: float, v: float) -> SurfaceFrame:
        point, du, dv = self.eval_with_tangents(u, v)
        n = np.cross(du, dv)
        norm = np.linalg.norm(n)
        if norm < DEGENERATE_TANGENT_GUARD:
            raise ValueError(f"degenerate parameterization at ({u}, {v})")
        n = self.normal_side * n / norm
        t_u = du / np.linalg.norm(du)
        t_v = np.cross(n, t_u)
        return SurfaceFrame(point, n, t_u, t_v)

    def eval_grid(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a parameter grid; returns (len(us), len(vs), 3)."""
        nu, nv = self.n_ctrl
        Au = np.stack([basis_row(self._ku, self.degree_u, nu, float(u)) for u in us])
        Av = np.stack([basis_row(self._kv, self.degree_v, nv, float(v)) for v in vs])
        return np.einsum("ai,bj,ijc->abc", Au, Av, self.control_points)


# ---------------------------------------------------------------------------
# least-squares fit of control points to gridded samples


def chord_length_params(samples: np.ndarray, axis: int) -> np.ndarray:
    """Averaged normalized chord-length parameters along one grid axis."""
    moved = np.moveaxis(samples, axis, 0)  # (n_along, n_across, 3)
    seg = np.linalg.norm(np.diff(moved, axis=0), axis=2)  # (n_along-1, n_across)
    total = seg.sum(axis=0)
    if np.any(total <= 0):
        raise ValueError("insufficient sample coverage: zero chord length")
    cum = np.concatenate([np.zeros((1, seg.shape[1])), np.cumsum(seg, axis=0)], axis=0)
    return (cum / total).mean(axis=1)


@dataclass(frozen=True)
class FitReport:
    max_residual: float
    rms_residual: float


def fit_control_points(
    samples: np.ndarray,
    degrees=(3, 3),
    n_ctrl=(6, 6),
    u_params: np.ndarray | None = None,
    v_params: np.ndarray | None = None,
    normal_side: int = 1,
) -> tuple[BSplineSurface, FitReport]:
    """Global least-squares B-spline fit to a grid of 3-D samples.

    Parameters default to averaged chord length; pass explicit u/v params to
    reproduce a known parameterization.
    """
    samples = np.asarray(samples, dtype=float)
    r, c = samples.shape[:2]
    nu, nv = n_ctrl
    if r < nu or c < nv:
        raise ValueError("insufficient sample coverage: sample grid smaller than control grid")
    if u_params is None:
        u_params = chord_length_params(samples, axis=0)
    if v_params is None:
        v_params = chord_length_params(samples, axis=1)

    ku = clamped_uniform_knots(nu, degrees[0])
    kv = clamped_uniform_knots(nv, degrees[1])
    Au = np.stack([basis_row(ku.tolist(), degrees[0], nu, float(u)) for u in u_params])
    Av = np.stack([basis_row(kv.tolist(), degrees[1], nv, float(v)) for v in v_params])
    if np.linalg.matrix_rank(Au) < nu or np.linalg.matrix_rank(Av) < nv:
        raise ValueError("insufficient sample coverage: rank-deficient fit system")

    # separable two-stage least squares over the tensor-product basis
    mid = np.linalg.lstsq(Au, samples.reshape(r, -1), rcond=None)[0].reshape(nu, c, 3)
    P = np.linalg.lstsq(Av, np.swapaxes(mid, 0, 1).reshape(c, -1), rcond=None)[0]
    P = np.swapaxes(P.reshape(nv, nu, 3), 0, 1)

    surf = BSplineSurface(degrees, ku, kv, P, normal_side=normal_side)
    recon = np.einsum("ai,bj,ijc->abc", Au, Av, P)
    res = np.linalg.norm(recon - samples, axis=2)
    return surf, FitReport(float(res.max()), float(np.sqrt((res**2).mean())))


# ---------------------------------------------------------------------------
# closest-fit plane (input mapping frame)


def rotation_from_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues rotation from exponential coordinates."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    if theta < 1e-300:
        return np.eye(3)
    k = w / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * (K @ K)


def exp_coords_for_normal(n: np.ndarray) -> np.ndarray:
    """w = [w_x, w_y, 0] with exp(w) e_z = n (axis constrained to the xy plane)."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    c = float(np.clip(n[2], -1.0, 1.0))
    theta = math.acos(c)
    axis = np.array([-n[1], n[0], 0.0])
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        # n parallel to z: identity, or a half turn about x for n = -z
        return np.zeros(3) if c > 0 else np.array([math.pi, 0.0, 0.0])
    return theta * axis / norm


def _plane_objectives(params: np.ndarray, pts: np.ndarray) -> tuple[float, float]:
    wx, wy, d = params
    n = rotation_from_exp(np.array([wx, wy, 0.0]))[:, 2]
    signed = d - pts @ n
    return float(np.dot(signed, signed)), float(signed.sum())


def best_fit_plane(surface_or_points, maxiter: int = 4000) -> PlaneFit:
    """Closest-fit plane to the control net, refined with Nelder-Mead.

    The squared signed-distance objective is minimized over (w_x, w_y, d);
    the unsquared projected-residual sum is reported alongside it.
    """
    if isinstance(surface_or_points, BSplineSurface):
        grid = surface_or_points.control_points
    else:
        grid = np.asarray(surface_or_points, dtype=float)
    pts = grid.reshape(-1, 3)
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 control points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[1] < 1e-12 * max(svals[0], 1.0):
        raise ValueError("control points are collinear; plane is not defined")
    n0 = vt[2]
    # orient toward +z (ties broken by first nonzero component) so planar
    # nets in z = d recover w = 0, d > 0
    if n0[2] < 0 or (n0[2] == 0 and (n0[0] < 0 or (n0[0] == 0 and n0[1] < 0))):
        n0 = -n0
    w0 = exp_coords_for_normal(n0)
    x0 = np.array([w0[0], w0[1], float(n0 @ centroid)])

    res = minimize(
        lambda p: _plane_objectives(p, pts)[0],
        x0,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-12, "fatol": 1e-16},
    )
    best = res.x if res.fun <= _plane_objectives(x0, pts)[0] else x0
    objective, linear_objective = _plane_objectives(best, pts)
    if not res.success and res.fun > _plane_objectives(x0, pts)[0] + 1e-12:
        raise PlaneFitError(
            f"simplex stagnated after {res.nit} iterations (objective {res.fun:.3e})",
            best=res.x,
            objective=float(res.fun),
        )

    w = np.array([best[0], best[1], 0.0])
    n = rotation_from_exp(w)[:, 2]
    # project the control net's first grid direction into the plane to fix
    # the in-plane axes of the input frame
    if grid.ndim == 3 and grid.shape[0] > 1:
        u_dir = (grid[1:] - grid[:-1]).mean(axis=(0, 1))
    else:
        u_dir = np.array([1.0, 0.0, 0.0])
    t_u = u_dir - (u_dir @ n) * n
    norm = np.linalg.norm(t_u)
    if norm < 1e-12:
        t_u = np.array([1.0, 0.0, 0.0]) - n[0] * n
        norm = np.linalg.norm(t_u)
    t_u = t_u / norm
    t_v = np.cross(n, t_u)
    rotation = np.column_stack([t_u, t_v, n])
    return PlaneFit(
        w=w,
        d=float(best[2]),
        rotation=rotation,
        objective=objective,
        linear_objective=linear_objective,
        normal=n,
    )


# ---------------------------------------------------------------------------
# closest-point projection


@dataclass(frozen=True)
class ProjectionResult:
    u: float
    v: float
    distance: float
    converged: bool

    @property
    def uv(self) -> tuple[float, float]:
        return (self.u, self.v)


def project_to_surface(
    surf: BSplineSurface,
    point: np.ndarray,
    seed: tuple[float, float] | None = None,
    grid: int = PROJECT_GRID,
    max_iters: int = PROJECT_MAX_ITERS,
    tol: float = PROJECT_TOL,
) -> ProjectionResult:
    """Parameters of the closest surface point (coarse grid + damped Gauss-Newton)."""
    point = np.asarray(point, dtype=float)
    us = np.linspace(0.0, 1.0, grid)
    vs = np.linspace(0.0, 1.0, grid)
    pts = surf.eval_grid(us, vs)
    d2 = np.sum((pts - point) ** 2, axis=2)
    iu, iv = np.unravel_index(np.argmin(d2), d2.shape)
    best_uv = np.array([us[iu], vs[iv]])
    best_d2 = float(d2[iu, iv])
    if seed is not None:
        p_seed = surf.eval(*seed)
        seed_d2 = float(np.sum((p_seed - point) ** 2))
        if seed_d2 < best_d2:
            best_uv = np.array([clamp_params(*seed)[0], clamp_params(*seed)[1]])
            best_d2 = seed_d2

    uv = best_uv.copy()
    lam = 1e-10
    improved = False
    for _ in range(max_iters):
        pos, du, dv = surf.eval_with_tangents(uv[0], uv[1])
        r = pos - point
        J = np.column_stack([du, dv])
        g = J.T @ r
        H = J.T @ J + lam * np.eye(2)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        trial = np.clip(uv + step, 0.0, 1.0)
        p_trial = surf.eval(trial[0], trial[1])
        trial_d2 = float(np.sum((p_trial - point) ** 2))
        if trial_d2 <= best_d2:
            moved = np.linalg.norm(trial - uv)
            uv = trial
            if trial_d2 < best_d2:
                improved = True
            best_d2 = trial_d2
            lam = max(lam * 0.5, 1e-12)
            if moved < tol:
                break
        else:
            lam *= 10.0
            if lam > 1e6:
                break

    # warning flag (converged=False) when refinement never improved on the
    # coarse grid/seed initialization and the point is not already on-surface
    return ProjectionResult(
        u=float(uv[0]),
        v=float(uv[1]),
        distance=math.sqrt(best_d2),
        converged=bool(improved or best_d2 <= (10.0 * tol) ** 2),
    )


# ---------------------------------------------------------------------------
# surface document (de)serialization

SURFACE_SCHEMA = "surface/1"


def surface_to_doc(surf: BSplineSurface) -> dict:
    return {
        "schema": SURFACE_SCHEMA,
        "degrees": [surf.degree_u, surf.degree_v],
        "knots_u": [float(k) for k in surf.knots_u],
        "knots_v": [float(k) for k in surf.knots_v],
        "normal_side": surf.normal_side,
        "control_points": [
            [[float(c) for c in p] for p in row] for row in surf.control_points
        ],
    }


def surface_from_doc(doc: dict) -> BSplineSurface:
    if doc.get("schema") != SURFACE_SCHEMA:
        raise ValueError(f"unsupported surface schema {doc.get('schema')!r}")
    return BSplineSurface(
        doc["degrees"],
        doc["knots_u"],
        doc["knots_v"],
        doc["control_points"],
        normal_side=doc.get("normal_side", 1),
    )
