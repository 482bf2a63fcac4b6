"""Slow manifolds of saddle type, fast eigenframes and manifold meshes.

The saddle-type branches C_l and C_r are computed as solutions of a
two-point boundary value problem.  The trajectory starts in the affine plane
through the critical-manifold point at the entry height that is spanned by
the unstable layer eigenvector (and the x2-direction is fixed by requiring
the offset to be along ``e_u``), and ends in the corresponding plane at the
exit height spanned by the stable eigenvector.  For a saddle these
conditions pin the solution exponentially close to the slow manifold away
from two thin boundary layers.  The problem is solved by multiple
shooting with Newton's method, making use of variational equations for the
Jacobian.

The repelling middle branch is attracting in backward time and is obtained
by plain backward integration.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .core_model import (
    Params,
    critical_manifold,
    critical_x1,
    cubic_df,
    cubic_f,
    fhn_rhs,
    layer_jacobian,
)
from .errors import FHNError, FoldTooClose, NewtonDivergence, NoIntersection, OutOfRange
from .integrator import IntegratorConfig, Trajectory, integrate, integrate_variational

Side = Literal["stable", "unstable"]


@dataclass(frozen=True, eq=False)
class Eigenframe:
    """Eigen-decomposition of the layer Jacobian at a base point.

    On the saddle branches ``e_s`` and ``e_u`` are unit eigenvectors in the
    (x1, x2) plane, oriented so that their x1 component is positive.  For
    base points with a complex or doubly unstable spectrum (the middle
    branch) they are ``None`` and only ``eigenvalues`` is meaningful.
    """

    base: np.ndarray
    eigenvalues: tuple
    jacobian: np.ndarray
    e_s: Optional[np.ndarray] = None
    e_u: Optional[np.ndarray] = None

    @property
    def is_saddle(self) -> bool:
        return self.e_s is not None

    @property
    def lam_s(self) -> float:
        return self.eigenvalues[0].real

    @property
    def lam_u(self) -> float:
        return self.eigenvalues[1].real

    def residuals(self):
        """``(|J e_s - lam_s e_s|, |J e_u - lam_u e_u|)``."""
        if not self.is_saddle:
            raise ValueError("frame is not of saddle type")
        j = self.jacobian
        return (float(np.linalg.norm(j @ self.e_s - self.lam_s * self.e_s)),
                float(np.linalg.norm(j @ self.e_u - self.lam_u * self.e_u)))

    def coordinates(self, points) -> np.ndarray:
        """Coordinates ``(xi, eta)`` of (x1, x2) points in the basis (e_u, e_s) at the base."""
        basis = np.column_stack([self.e_u, self.e_s])
        rel = np.atleast_2d(points)[:, :2] - self.base[:2]
        return np.linalg.solve(basis, rel.T).T


def layer_eigenframe(state, params: Params) -> Eigenframe:
    """Fast-subsystem eigenframe at ``state`` (only x1 enters the layer Jacobian)."""
    state = np.asarray(state, dtype=float)
    jac = layer_jacobian(state[0], params)
    tr = params.s / params.delta
    det = cubic_df(state[0], params.alpha_cubic) / params.delta
    disc = tr * tr - 4.0 * det
    if disc <= 0 or det >= 0:
        sq = np.sqrt(complex(disc))
        evs = ((tr - sq) / 2.0, (tr + sq) / 2.0)
        return Eigenframe(state.copy(), tuple(complex(e) for e in evs), jac)
    sq = math.sqrt(disc)
    lam_u = 0.5 * (tr + sq)
    lam_s = det / lam_u  # product of the roots, avoids cancellation
    e_s = np.array([1.0, lam_s]) / math.hypot(1.0, lam_s)
    e_u = np.array([1.0, lam_u]) / math.hypot(1.0, lam_u)
    return Eigenframe(state.copy(), (complex(lam_s), complex(lam_u)), jac, e_s, e_u)


@dataclass(frozen=True, eq=False)
class SlowManifoldSegment:
    """Discretised piece of a slow manifold.

    ``samples`` are the shooting nodes followed by the end point of the last
    segment, so that their y values are strictly monotone.  ``segments``
    holds the dense trajectories between consecutive samples.
    """

    branch: str
    params: Params
    y_range: tuple
    samples: np.ndarray
    frames: tuple
    segments: tuple = field(repr=False)
    total_time: float = float("nan")
    residual: float = float("nan")
    iterations: int = 0

    @property
    def ys(self) -> np.ndarray:
        return self.samples[:, 2]

    def distance_to_critical(self) -> np.ndarray:
        """Distance in (x1, x2) of each sample to C_0 at the same height."""
        out = np.empty(len(self.samples))
        for i, (x1, x2, y) in enumerate(self.samples):
            out[i] = math.hypot(x1 - critical_x1(y, self.params, self.branch), x2)
        return out


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _branch_y_extent(params: Params, branch: str):
    info = critical_manifold(params)
    y_lo_fold, y_hi_fold = info.fold_y
    if branch == "left":
        return y_lo_fold, math.inf
    if branch == "right":
        return -math.inf, y_hi_fold
    raise ValueError(f"saddle slow manifolds exist on 'left' or 'right', not {branch!r}")


def _initial_guess(params, branch, y_entry, y_exit, n):
    ys = np.linspace(y_entry, y_exit, 2001)
    x1 = np.array([critical_x1(y, params, branch) for y in ys])
    rate = (x1 - ys) / params.s
    tau = cumulative_trapezoid(1.0 / rate, ys, initial=0.0)
    T = float(tau[-1])
    y_nodes = np.interp(np.arange(n) * T / n, tau, ys)
    nodes = np.array([[critical_x1(y, params, branch), 0.0, y] for y in y_nodes])
    return nodes, T


def compute_saddle_slow_manifold(params: Params, branch: str = "left", y_range=(0.06, 0.12),
                                 n_nodes: Optional[int] = None, config: Optional[IntegratorConfig] = None,
                                 tol: float = 1e-9, max_iter: int = 30,
                                 fold_margin: float = 0.01) -> SlowManifoldSegment:
    """Saddle-type slow manifold over ``y_range`` by multiple shooting.

    Parameters
    ----------
    params : Params
        System parameters, ``eps > 0``.
    branch : {"left", "right"}
    y_range : (float, float)
        Heights between which the manifold is computed.  The flow
        direction on the branch decides which end is the entry.
    n_nodes : int, optional
        Number of shooting segments.  By default 100, raised when needed so
        that the fast growth over one segment stays below ``exp(4)``.
    tol : float
        Newton stops once the max-norm of the shooting residual is below it.
    fold_margin : float
        Minimal admissible distance (in y) between ``y_range`` and the fold.

    Raises
    ------
    FoldTooClose
        If ``y_range`` comes closer than ``fold_margin`` to the fold height.
    NewtonDivergence
        If the damped Newton iteration fails; ``.residual`` holds the last
        residual norm.
    """
    if params.eps <= 0:
        raise ValueError("the slow manifold computation needs eps > 0")
    if n_nodes is not None and n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    config = config or IntegratorConfig()
    y_a, y_b = sorted(float(v) for v in y_range)
    if not y_a < y_b:
        raise ValueError("y_range must have positive length")
    lo, hi = _branch_y_extent(params, branch)
    if y_a < lo + fold_margin or y_b > hi - fold_margin:
        raise FoldTooClose(f"y_range [{y_a}, {y_b}] is within {fold_margin} of the fold")

    # direction of the slow flow on this branch
    signs = {np.sign(critical_x1(y, params, branch) - y) for y in np.linspace(y_a, y_b, 21)}
    if len(signs) != 1 or 0 in signs:
        raise ValueError("the equilibrium lies inside y_range")
    y_entry, y_exit = (y_b, y_a) if signs.pop() < 0 else (y_a, y_b)

    c_in = np.array([critical_x1(y_entry, params, branch), 0.0, y_entry])
    c_out = np.array([critical_x1(y_exit, params, branch), 0.0, y_exit])
    e_u_in = layer_eigenframe(c_in, params).e_u
    e_s_out = layer_eigenframe(c_out, params).e_s

    if n_nodes is None:
        _, T = _initial_guess(params, branch, y_entry, y_exit, 1)
        lam = max(abs(layer_eigenframe(c, params).lam_u) + abs(layer_eigenframe(c, params).lam_s)
                  for c in (c_in, c_out))
        n_nodes = max(100, int(math.ceil(lam * T / (4.0 * params.eps))))
    n = n_nodes
    nodes, T = _initial_guess(params, branch, y_entry, y_exit, n)
    z = np.concatenate([nodes.ravel(), [T]])

    def evaluate(z, with_jac):
        X = z[:-1].reshape(n, 3)
        T = z[-1]
        if not T > 0:
            return None
        h = T / n
        res = np.empty(3 * n + 1)
        ends = np.empty((n, 3))
        mats = []
        for i in range(n):
            if with_jac:
                _, Z, M = integrate_variational(params, X[i], h, "forward", config)
                mats.append(M)
            else:
                Z = integrate("full", params, X[i], "forward", config, t_span=h).y_final
            if not np.all(np.isfinite(Z)):
                return None
            ends[i] = Z
        res[0] = X[0, 2] - y_entry
        res[1] = _cross2(e_u_in, X[0, :2] - c_in[:2])
        res[2:3 * n - 1] = (ends[:-1] - X[1:]).ravel()
        res[3 * n - 1] = ends[-1, 2] - y_exit
        res[3 * n] = _cross2(e_s_out, ends[-1, :2] - c_out[:2])
        if not with_jac:
            return res, None
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        put(0, 2, 1.0)
        put(1, 0, -e_u_in[1])
        put(1, 1, e_u_in[0])
        tcol = 3 * n
        for i in range(n - 1):
            r0 = 2 + 3 * i
            M = mats[i]
            dz = fhn_rhs(ends[i], params) / n
            for a in range(3):
                for b in range(3):
                    put(r0 + a, 3 * i + b, M[a, b])
                put(r0 + a, 3 * (i + 1) + a, -1.0)
                put(r0 + a, tcol, dz[a])
        M = mats[-1]
        dz = fhn_rhs(ends[-1], params) / n
        base = 3 * (n - 1)
        g_y = M[2]
        g_c = -e_s_out[1] * M[0] + e_s_out[0] * M[1]
        for b in range(3):
            put(3 * n - 1, base + b, g_y[b])
            put(3 * n, base + b, g_c[b])
        put(3 * n - 1, tcol, dz[2])
        put(3 * n, tcol, -e_s_out[1] * dz[0] + e_s_out[0] * dz[1])
        jac = sp.csc_matrix((vals, (rows, cols)), shape=(3 * n + 1, 3 * n + 1))
        return res, jac

    out = evaluate(z, True)
    if out is None:
        raise NewtonDivergence("initial guess could not be integrated")
    res, jac = out
    norm = float(np.max(np.abs(res)))
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise NewtonDivergence(f"no convergence after {max_iter} iterations", norm)
        step = spsolve(jac, -res)
        if not np.all(np.isfinite(step)):
            raise NewtonDivergence("singular Newton matrix", norm)
        lam = 1.0
        for _ in range(9):
            trial = z + lam * step
            tout = evaluate(trial, False)
            if tout is not None and np.max(np.abs(tout[0])) < norm:
                break
            lam *= 0.5
        else:
            raise NewtonDivergence("damping exhausted without decrease", norm)
        z = trial
        res, jac = evaluate(z, True)
        norm = float(np.max(np.abs(res)))
        it += 1

    X = z[:-1].reshape(n, 3)
    T = float(z[-1])
    segs = tuple(integrate("full", params, X[i], "forward", config, t_span=T / n) for i in range(n))
    samples = np.vstack([X, segs[-1].y_final[None, :]])
    frames = tuple(layer_eigenframe(pt, params) for pt in samples)
    return SlowManifoldSegment(branch, params, (y_a, y_b), samples, frames, segs, T, norm, it)


def section_point(segment: SlowManifoldSegment, y_section: float):
    """Point of the slow manifold at height ``y_section`` and its layer eigenframe.

    Raises
    ------
    OutOfRange
        If ``y_section`` lies outside the heights covered by ``segment``.
    """
    ys = segment.ys
    lo, hi = min(ys[0], ys[-1]), max(ys[0], ys[-1])
    if not lo <= y_section <= hi:
        raise OutOfRange(f"y={y_section} outside [{lo}, {hi}]")
    hit = np.nonzero(ys == y_section)[0]
    if hit.size:
        k = int(hit[0])
        return segment.samples[k].copy(), segment.frames[k]
    k = int(np.nonzero((ys[:-1] - y_section) * (ys[1:] - y_section) < 0)[0][0])
    traj = segment.segments[k]
    t_hit = brentq(lambda t: traj(t)[2] - y_section, traj.t[0], traj.t[-1], xtol=1e-15,
                   rtol=4 * np.finfo(float).eps)
    pt = traj(t_hit)
    return pt, layer_eigenframe(pt, segment.params)


def middle_branch_seeds(alpha_cubic: float = 0.1, count: int = 11) -> np.ndarray:
    """Equally spaced x1 seeds well inside the middle branch."""
    lo, hi = _folds(alpha_cubic)
    w = hi - lo
    return np.linspace(lo + 0.05 * w, hi - 0.05 * w, count)


def _folds(alpha_cubic):
    info = critical_manifold(Params(alpha_cubic=alpha_cubic))
    return info.fold_lo, info.fold_hi


def middle_branch_backward(params: Params, x1_seed: float,
                           config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Backward trajectory from the point of C_m above ``x1_seed``.

    C_m is repelling in both fast directions, so in backward time the orbit
    is drawn onto the middle slow manifold and follows it until it leaves
    near the lower fold.
    """
    lo, hi = _folds(params.alpha_cubic)
    if not lo < x1_seed < hi:
        raise ValueError(f"seed {x1_seed} not strictly between the folds ({lo}, {hi})")
    config = config or IntegratorConfig(max_time=200.0)
    start = np.array([x1_seed, 0.0, cubic_f(x1_seed, params.alpha_cubic) + params.p])
    return integrate("full", params, start, "backward", config)


@dataclass(frozen=True, eq=False)
class ManifoldMesh:
    """Trajectories seeded along a slow manifold in a fast eigendirection.

    ``signs[i]`` is +1 or -1 according to the side of the seed, ``bases``
    are the points on the slow manifold and ``trajectories[i]`` is ``None``
    when ``errors[i]`` records an integration failure.
    """

    side: str
    offset: float
    bases: np.ndarray
    signs: np.ndarray
    seeds: np.ndarray
    trajectories: tuple = field(repr=False)
    errors: tuple = ()
    directions: tuple = ()

    def section_traces(self, y_section: float, component: int = 2):
        """First crossing of each trajectory with the section, split by seed sign.

        Returns a dict ``{+1: array, -1: array}`` of (x1, x2) points ordered
        as the seeds.
        """
        out = {}
        for sign in (1, -1):
            pts = []
            for k in np.nonzero(self.signs == sign)[0]:
                tr = self.trajectories[k]
                if tr is None:
                    continue
                pt = first_crossing(tr, y_section, component)
                if pt is not None:
                    pts.append(np.delete(pt, component)[:2])
            out[sign] = np.array(pts).reshape(-1, 2)
        return out


def first_crossing(traj: Trajectory, level: float, component: int = 2):
    """State at the first crossing of ``state[component] == level`` after the start."""
    g = traj.y[:, component] - level
    idx = np.nonzero(g[:-1] * g[1:] < 0)[0]
    exact = np.nonzero(g[1:] == 0)[0]
    cand = sorted(set(idx.tolist()) | set(exact.tolist()))
    if not cand:
        return None
    i = cand[0]
    if g[i + 1] == 0:
        return traj.y[i + 1].copy()
    a, b = traj.t[i], traj.t[i + 1]
    tc = brentq(lambda t: traj(t)[component] - level, min(a, b), max(a, b), xtol=1e-15,
                rtol=4 * np.finfo(float).eps)
    return traj(tc)


def manifold_mesh(segment: SlowManifoldSegment, side: Side, offset: float, n: int,
                  config: Optional[IntegratorConfig] = None, t_max: float = 5.0) -> ManifoldMesh:
    """W^s or W^u of a slow manifold as a family of trajectories.

    ``n`` base points are spread over the interior samples of ``segment``.
    Each base point is displaced by ``+offset`` and ``-offset`` along the
    stable (integrated backward) or unstable (integrated forward)
    eigenvector of its layer frame, giving ``2 n`` trajectories of length
    at most ``t_max``.  Integration failures are recorded, not raised.
    """
    if side not in ("stable", "unstable"):
        raise ValueError(f"side must be 'stable' or 'unstable', not {side!r}")
    if offset != 0 and not 1e-6 <= offset <= 1e-2:
        raise ValueError("offset must lie in [1e-6, 1e-2]")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    config = config or IntegratorConfig()
    m = len(segment.samples)
    idx = np.unique(np.round(np.linspace(0, m - 1, n + 2)[1:-1]).astype(int))
    bases, signs, seeds, trajs, errors = [], [], [], [], []
    direction = "backward" if side == "stable" else "forward"
    for k in idx:
        frame = segment.frames[k]
        if not frame.is_saddle:
            raise ValueError("manifold meshes need a saddle-type segment")
        vec = frame.e_s if side == "stable" else frame.e_u
        for sign in (1, -1):
            seed = segment.samples[k].copy()
            seed[:2] += sign * offset * vec
            bases.append(segment.samples[k])
            signs.append(sign)
            seeds.append(seed)
            try:
                trajs.append(integrate("full", segment.params, seed, direction, config, t_span=t_max))
                errors.append(None)
            except FHNError as exc:
                trajs.append(None)
                errors.append(f"{type(exc).__name__}: {exc}")
    return ManifoldMesh(side, offset, np.array(bases), np.array(signs), np.array(seeds),
                        tuple(trajs), tuple(errors), (direction,) * len(trajs))


def _segment_intersections(a: np.ndarray, b: np.ndarray):
    """All crossings of polylines ``a`` and ``b``: list of (i, j, point)."""
    hits = []
    for i in range(len(a) - 1):
        p, r = a[i], a[i + 1] - a[i]
        for j in range(len(b) - 1):
            q, s = b[j], b[j + 1] - b[j]
            den = _cross2(r, s)
            if den == 0:
                continue
            t = _cross2(q - p, s) / den
            u = _cross2(q - p, r) / den
            # half-open parameter ranges: a shared vertex is not a crossing
            if 0 <= t < 1 and 0 <= u < 1:
                hits.append((i, j, p + t * r))
    return hits


def _acute_angle(u, v):
    c = abs(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(math.acos(min(1.0, c)))


def curve_crossing_angle(a, b, touch_tol: float = 1e-8) -> float:
    """Angle between two planar polylines at their first crossing.

    If the polylines do not cross, the nearest pair of vertices is used
    provided it is closer than ``touch_tol``; otherwise NoIntersection.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    if len(a) < 2 or len(b) < 2:
        raise NoIntersection("each curve needs at least two points")
    hits = _segment_intersections(a, b)
    if hits:
        i, j, _ = hits[0]
        return _acute_angle(a[i + 1] - a[i], b[j + 1] - b[j])
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    if d[i, j] > touch_tol:
        raise NoIntersection(f"curves stay {d[i, j]:.3g} apart")
    ia = min(i, len(a) - 2)
    jb = min(j, len(b) - 2)
    return _acute_angle(a[ia + 1] - a[ia], b[jb + 1] - b[jb])


def transversality_check(mesh_a: ManifoldMesh, mesh_b: ManifoldMesh, y_section: float,
                         angle_min: float = 1e-3):
    """Crossing angle of the section traces of two meshes.

    Every pair of same-sign trace branches is examined and the first
    crossing found is used.  The result is ``(angle, transversal)`` with
    ``transversal = angle > angle_min``.

    Raises
    ------
    NoIntersection
        If no pair of trace branches crosses.
    """
    ta = mesh_a.section_traces(y_section)
    tb = mesh_b.section_traces(y_section)
    for sa in (1, -1):
        for sb in (1, -1):
            try:
                ang = curve_crossing_angle(ta[sa], tb[sb])
            except NoIntersection:
                continue
            return ang, ang > angle_min
    raise NoIntersection("the section traces of the two meshes are disjoint")


def _fmt(v) -> str:
    return f"{v:.16g}"


def segment_to_json(segment: SlowManifoldSegment, path=None) -> str:
    """JSON document with samples and eigenframes; written to ``path`` if given."""
    doc = {
        "branch": segment.branch,
        "params": {k: getattr(segment.params, k) for k in ("p", "s", "delta", "alpha_cubic", "eps")},
        "y_range": list(segment.y_range),
        "total_time": segment.total_time,
        "residual": segment.residual,
        "samples": [
            {
                "state": [float(v) for v in pt],
                "eigenvalues": [[e.real, e.imag] for e in fr.eigenvalues],
                "e_s": None if fr.e_s is None else fr.e_s.tolist(),
                "e_u": None if fr.e_u is None else fr.e_u.tolist(),
            }
            for pt, fr in zip(segment.samples, segment.frames)
        ],
    }
    text = json.dumps(doc, indent=1)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def segment_to_csv(segment: SlowManifoldSegment, path, header: str = "") -> None:
    """Samples with eigenvalues as CSV: x1, x2, y, lam_1, lam_2 (real parts)."""
    with open(path, "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write("x1,x2,y,lam_1,lam_2\n")
        for pt, fr in zip(segment.samples, segment.frames):
            vals = (*pt, fr.eigenvalues[0].real, fr.eigenvalues[1].real)
            fh.write(",".join(_fmt(v) for v in vals) + "\n")


def mesh_to_csv(mesh: ManifoldMesh, directory, header: str = "") -> list:
    """One CSV per trajectory plus ``manifest.csv`` listing the seeds."""
    os.makedirs(directory, exist_ok=True)
    names = []
    with open(os.path.join(directory, "manifest.csv"), "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write("index,file,sign,seed_x1,seed_x2,seed_y,status\n")
        for k, (tr, seed, sign) in enumerate(zip(mesh.trajectories, mesh.seeds, mesh.signs)):
            name = f"traj_{k:04d}.csv"
            status = mesh.errors[k] or tr.termination.value
            if tr is not None:
                tr.to_csv(os.path.join(directory, name), header=header)
                names.append(name)
            else:
                name = ""
            fh.write(",".join([str(k), name, str(int(sign)), *map(_fmt, seed), status]) + "\n")
    return names
