"""Section traces of W^s(q), the turn diagnostics and parameter-plane curves.

Coordinates on a section ``y = const`` are ``(xi, eta)`` relative to the
slow-manifold point ``p_l``: ``xi`` along the unstable layer eigenvector
``e_u`` and ``eta`` along the stable one ``e_s`` (both oriented towards
increasing x1).  The trace of W^s(q) runs close to the line
``p_l + span(e_s)`` and turns back at its eta-minimum.  The signed offset of
the turn, ``delta = eta_min``, is negative when the turn lies on the far
side of the line ``p_l + span(e_u)`` (so that W^s(q) crosses the
linearised W^u(C_l)) and positive when it does not reach it.  Tangency is
``delta = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core_model import (
    Params,
    critical_manifold,
    eigen_analysis,
    equilibrium,
    fhn_rhs,
    fold_points,
    singular_hopf_limits,
)
from .errors import (
    AllRealEigenvalues,
    EmptyTrace,
    HorizonReached,
    Inconclusive,
    NoConvergence,
    NoSignChange,
    NoTurn,
    OutOfRange,
    Unbounded,
)
from .integrator import (
    IntegratorConfig,
    Termination,
    Trajectory,
    integrate,
    integrate_to_section,
    integrate_variational,
)
from .slow_manifold import Eigenframe, compute_saddle_slow_manifold, section_point

TRACE_CONFIG = IntegratorConfig(max_time=100.0)


def pmap(func: Callable, items, threads: int = 1) -> list:
    """Ordered map, optionally over a thread pool (compiled kernels release the GIL)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def default_section_height(eps: float, alpha_cubic: float = 0.1) -> float:
    """Section height ``x1_- + 4.13 eps`` used for the tangency computations.

    ``x1_-`` is the height of q at the singular Hopf point p_-.  At
    ``eps = 0.01`` this is the section y = 0.09; for smaller eps the section
    moves down with the region where W^s(q) still reaches C_l.
    """
    return fold_points(alpha_cubic)[0] + 4.13 * eps


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True, eq=False)
class SectionTrace:
    """Ordered intersection points of a 2D manifold with ``y = y_section``.

    ``params`` holds the seed parameters (angles for W^s(q)), increasing
    along the trace.  ``closed`` is True when every seed of a full circle
    reached the section, in which case the trace is cyclic.
    """

    params: np.ndarray
    points: np.ndarray
    y_section: float
    provenance: str = "StableManifoldOfQ"
    closed: bool = False
    n_escaped: int = 0
    n_bounded: int = 0

    def __len__(self):
        return len(self.params)

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w") as fh:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
            fh.write("seed_angle,x1,x2\n")
            for th, (x1, x2) in zip(self.params, self.points):
                fh.write(f"{th:.16g},{x1:.16g},{x2:.16g}\n")


def stable_plane(params: Params):
    """``(q, basis)``: q and a 3x2 basis of the tangent plane of W^s(q).

    For a saddle-focus the basis is the real and imaginary part of the
    complex eigenvector, in which the linear flow is a rotation combined
    with a contraction, so circles in these coordinates meet every orbit of
    the linearised W^s(q) once.  The pair is scaled to unit RMS length, so a
    seed circle of radius r has RMS distance r from q.

    Raises
    ------
    EmptyTrace
        If W^s(q) is not two-dimensional.
    """
    q = equilibrium(params)
    eig = eigen_analysis(params)
    if eig.has_complex_pair:
        if eig.complex_pair[0] >= 0:
            raise EmptyTrace("the complex pair is not stable, W^s(q) is not two-dimensional")
        basis = eig.frame[:, 1:3].copy()
        return q, basis * math.sqrt(2.0 / np.sum(basis**2))
    evs = np.array([e.real for e in eig.eigenvalues])
    stable = np.nonzero(evs < 0)[0]
    if len(stable) != 2:
        raise EmptyTrace("W^s(q) is not two-dimensional")
    u, v = eig.frame[:, stable[0]].copy(), eig.frame[:, stable[1]].copy()
    u /= np.linalg.norm(u)
    v -= np.dot(u, v) * u
    v /= np.linalg.norm(v)
    return q, np.column_stack([u, v])


def _seed(q, basis, radius, theta):
    return q + radius * (math.cos(theta) * basis[:, 0] + math.sin(theta) * basis[:, 1])


def _backward_hit(params, seed, y_section, config):
    """``("hit", state) | ("escaped", None) | ("bounded", None)``."""
    try:
        tr = integrate_to_section(params, seed, "backward", y_section, config, record=False)
    except HorizonReached:
        return "bounded", None
    if tr.termination is Termination.ESCAPED:
        return "escaped", None
    return "hit", tr.event.state


def ws_trace(params: Params, y_section: float = 0.09, n_seeds: int = 400,
             seed_radius: float = 1e-3, config: Optional[IntegratorConfig] = None,
             threads: int = 1) -> SectionTrace:
    """Trace of W^s(q) on ``y = y_section`` by backward integration from a circle.

    Seeds are ``n_seeds`` equally spaced points on the circle of radius
    ``seed_radius`` around q in the tangent plane of W^s(q).  Each is
    integrated backward to its first crossing of the section; seeds that
    escape or stay bounded up to the horizon are excluded.  The trace starts
    after the largest angular gap of missing seeds.

    Raises
    ------
    EmptyTrace
        If no seed reaches the section.
    """
    if not seed_radius > 0:
        raise ValueError("seed_radius must be positive")
    if n_seeds < 3:
        raise ValueError("need at least three seeds")
    config = config or TRACE_CONFIG
    q, basis = stable_plane(params)
    thetas = 2.0 * np.pi * np.arange(n_seeds) / n_seeds
    results = pmap(lambda th: _backward_hit(params, _seed(q, basis, seed_radius, th), y_section,
                                            config), thetas, threads)
    ok = np.array([r[0] == "hit" for r in results])
    n_esc = sum(r[0] == "escaped" for r in results)
    n_bnd = sum(r[0] == "bounded" for r in results)
    if not ok.any():
        raise EmptyTrace(f"no seed reached y={y_section} ({n_esc} escaped, {n_bnd} bounded)")
    idx = np.nonzero(ok)[0]
    closed = bool(ok.all())
    if not closed:
        gaps = np.diff(np.concatenate([idx, [idx[0] + n_seeds]]))
        start = (int(np.argmax(gaps)) + 1) % len(idx)
        idx = np.roll(idx, -start)
    angles = thetas[idx].copy()
    angles[1:] += 2.0 * np.pi * np.cumsum(np.diff(angles) < 0)
    pts = np.array([results[k][1][:2] for k in idx])
    return SectionTrace(angles, pts, float(y_section), "StableManifoldOfQ", closed, n_esc, n_bnd)


@dataclass(frozen=True, eq=False)
class WuBranches:
    """The two branches of W^u(q); ``toward_right`` starts with increasing x1."""

    toward_right: Trajectory
    toward_left: Trajectory
    direction: np.ndarray


def unstable_direction(params: Params) -> np.ndarray:
    """Unit eigenvector of the positive real eigenvalue at q, with positive x1 component."""
    eig = eigen_analysis(params)
    if eig.real_eig <= 0:
        raise AllRealEigenvalues("q has no unstable real eigenvalue")
    v = eig.frame[:, 0] / np.linalg.norm(eig.frame[:, 0])
    return -v if v[0] < 0 else v


def wu_branches(params: Params, config: Optional[IntegratorConfig] = None,
                delta: float = 1e-6, t_span: float = 20.0, sign: int = 1) -> WuBranches:
    """Forward trajectories from ``q +- delta v`` with v the unit unstable eigenvector.

    ``sign = -1`` flips the eigenvector, which swaps the two branches.
    """
    q = equilibrium(params)
    v = sign * unstable_direction(params)
    config = config or IntegratorConfig(max_time=t_span)
    plus = integrate("full", params, q + delta * v, "forward", config, t_span=t_span)
    minus = integrate("full", params, q - delta * v, "forward", config, t_span=t_span)
    if sign < 0:
        plus, minus = minus, plus
    return WuBranches(plus, minus, v)


# ---------------------------------------------------------------------------
# turn point and distance


@dataclass(frozen=True)
class TurnPoint:
    point: np.ndarray
    delta: float
    index: int
    xi: float


def turn_point(trace: SectionTrace, frame: Eigenframe) -> TurnPoint:
    """Trace point with minimal eta; ``delta`` is that eta value.

    Raises
    ------
    NoTurn
        If the minimum sits at an end of an open trace (eta monotone).
    """
    if len(trace) == 0:
        raise EmptyTrace("empty trace")
    coords = frame.coordinates(trace.points)
    k = int(np.argmin(coords[:, 1]))
    if not trace.closed and (k == 0 or k == len(trace) - 1):
        raise NoTurn("eta is extremal at an end of the trace")
    return TurnPoint(trace.points[k].copy(), float(coords[k, 1]), k, float(coords[k, 0]))


def section_frame(params: Params, y_section: float):
    """``(p_l, frame)``: the point of C_{l,eps} on the section and its layer eigenframe.

    The slow manifold is computed on a y-interval around the section; near
    the fold the interval and the fold margin shrink with the distance of
    the section from the fold height.
    """
    y_fold = critical_manifold(params).fold_y[0]
    gap = y_section - y_fold
    if gap <= 0:
        raise OutOfRange("the section lies below the left fold and misses C_l")
    margin = min(0.01, 0.5 * gap)
    lo = y_section - min(0.02, gap - margin)
    seg = compute_saddle_slow_manifold(params, "left", (lo, y_section + 0.03), fold_margin=margin)
    return section_point(seg, y_section)


@dataclass(frozen=True, eq=False)
class TurnResult:
    """Turn (or closest-point) diagnostic of W^s(q) on a section."""

    value: float
    theta: float
    point: np.ndarray
    p_l: np.ndarray
    frame: Eigenframe
    trace: Optional[SectionTrace] = field(default=None, repr=False)


def _objective(kind, p_l, frame):
    if kind == "eta":
        return lambda x: float(frame.coordinates(x)[0, 1])
    if kind == "distance":
        return lambda x: float(np.hypot(*(x[:2] - p_l[:2])))
    raise ValueError(kind)


def _section_minimum(params, y_section, kind, n_seeds, seed_radius, config, refine, hint,
                     threads=1) -> TurnResult:
    p_l, frame = section_frame(params, y_section)
    obj = _objective(kind, p_l, frame)
    q, basis = stable_plane(params)
    step = 2.0 * np.pi / n_seeds

    def at(theta):
        status, state = _backward_hit(params, _seed(q, basis, seed_radius, theta), y_section, config)
        return state if status == "hit" else None

    def penal(theta):
        x = at(theta)
        return math.inf if x is None else obj(x[:2])

    def polish(th_lo, th_hi, th0, v0):
        if not refine:
            return th0, v0
        res = minimize_scalar(lambda t: min(penal(t), 1e3), bounds=(th_lo, th_hi), method="bounded",
                              options={"xatol": 1e-12, "maxiter": 200})
        if res.fun < v0:
            return float(res.x), float(res.fun)
        return th0, v0

    if hint is not None:
        # local window search around a previous optimum
        half = 4.0 * step
        for _ in range(3):
            ths = hint + np.linspace(-half, half, 17)
            vals = np.array(pmap(penal, ths, threads))
            k = int(np.argmin(vals))
            if np.isfinite(vals[k]) and 0 < k < 16 and np.isfinite(vals[k - 1]) and np.isfinite(vals[k + 1]):
                th, v = polish(ths[k - 1], ths[k + 1], ths[k], vals[k])
                x = at(th)
                return TurnResult(v, th, x[:2].copy(), p_l, frame, None)
            half *= 3.0
    trace = ws_trace(params, y_section, n_seeds, seed_radius, config, threads)
    vals = np.array([obj(x) for x in trace.points])
    k = int(np.argmin(vals))
    m = len(trace)
    if not trace.closed and (k == 0 or k == m - 1):
        if kind == "eta":
            raise NoTurn("eta is extremal at an end of the trace")
        th, v = trace.params[k], vals[k]
    else:
        th_lo = trace.params[k - 1] if k > 0 else trace.params[k] - step
        th_hi = trace.params[k + 1] if k < m - 1 else trace.params[k] + step
        if th_hi - th_lo > 2.5 * step:  # a neighbour is missing, stay in the resolved cell
            th_lo, th_hi = max(th_lo, trace.params[k] - step), min(th_hi, trace.params[k] + step)
        th, v = polish(th_lo, th_hi, trace.params[k], vals[k])
    x = at(th) if th != trace.params[k] else np.append(trace.points[k], y_section)
    return TurnResult(v, float(th), np.asarray(x)[:2].copy(), p_l, frame, trace)


def turn_offset(params: Params, y_section: float = 0.09, n_seeds: int = 400,
                seed_radius: float = 1e-3, config: Optional[IntegratorConfig] = None,
                refine: bool = True, hint: Optional[float] = None, threads: int = 1) -> TurnResult:
    """Signed turn offset ``delta`` of W^s(q) on the section, refined in the seed angle.

    The discrete eta-minimum of :func:`ws_trace` is polished by a bounded
    Brent search over the seed angle between its neighbours.  With ``hint``
    (a seed angle) only a window around it is searched.
    """
    config = config or TRACE_CONFIG
    return _section_minimum(params, y_section, "eta", n_seeds, seed_radius, config, refine, hint,
                            threads)


def turn_regime(params: Params, y_section: float = 0.09, n_seeds: int = 400,
                seed_radius: float = 1e-3, config: Optional[IntegratorConfig] = None,
                threads: int = 1):
    """``(sign, delta)``: side of the line ``p_l + span(e_u)`` reached by W^s(q).

    ``sign = -1`` when W^s(q) ∩ Sigma crosses to the far side (``delta < 0``,
    or no turn is resolved but the trace already runs past the line) and
    ``+1`` otherwise, including an empty trace or a section that misses
    C_l.  ``delta`` is the turn offset when it exists, else NaN.
    """
    config = config or TRACE_CONFIG
    try:
        r = turn_offset(params, y_section, n_seeds, seed_radius, config, threads=threads)
        return (-1 if r.value < 0 else 1), r.value
    except NoTurn:
        trace = ws_trace(params, y_section, n_seeds, seed_radius, config, threads)
        _, frame = section_frame(params, y_section)
        eta = frame.coordinates(trace.points)[:, 1]
        return (-1 if eta.min() < 0 else 1), math.nan
    except (EmptyTrace, OutOfRange):
        return 1, math.nan


def trace_distance(params: Params, y_section: float = 0.09, n_seeds: int = 400,
                   seed_radius: float = 1e-3, config: Optional[IntegratorConfig] = None,
                   refine: bool = True, hint: Optional[float] = None, threads: int = 1) -> TurnResult:
    """Minimal Euclidean distance in the section between W^s(q) and p_l."""
    config = config or TRACE_CONFIG
    return _section_minimum(params, y_section, "distance", n_seeds, seed_radius, config, refine,
                            hint, threads)


# ---------------------------------------------------------------------------
# parameter curves


@dataclass(frozen=True, eq=False)
class ParamCurve:
    """Points ``(p, s)`` of a curve with the residual of its defining equation."""

    kind: str
    samples: np.ndarray  # columns p, s, residual
    skipped: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.samples[:, 0]

    @property
    def s(self):
        return self.samples[:, 1]

    @property
    def residual(self):
        return self.samples[:, 2]

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w") as fh:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
            fh.write("s,p,residual,kind\n")
            for p, s, r in self.samples:
                fh.write(f"{s:.16g},{p:.16g},{r:.16g},{self.kind}\n")


def _make_curve(kind, rows, skipped, sort_col=1, extra=None):
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if len(arr):
        arr = arr[np.argsort(arr[:, sort_col], kind="stable")]
    return ParamCurve(kind, arr, tuple(skipped), extra or {})


class _Cached:
    """Memoised scalar function of p that also remembers the last optimal angle."""

    def __init__(self, fn):
        self.fn = fn
        self.cache = {}
        self.hint = None

    def __call__(self, p):
        if p not in self.cache:
            self.cache[p] = self.fn(p, self.hint)
            if self.cache[p][1] is not None:
                self.hint = self.cache[p][1]
        return self.cache[p][0]


class _Negated:
    def __init__(self, g):
        self.g = g

    @property
    def cache(self):
        return self.g.cache

    def __call__(self, p):
        return -self.g(p)


def _root_on_p(g: _Cached, a: float, b: float, tol: float, xtol: float, either_sign=False):
    """Root of g with ``g(a) < 0 < g(b)``: bisection until both ends are finite, then Brent.

    With ``either_sign`` a bracket with ``g(a) > 0 > g(b)`` is accepted too.
    """
    ga, gb = g(a), g(b)
    if either_sign and ga > 0 > gb:
        return _root_on_p(_Negated(g), a, b, tol, xtol)
    if not (ga < 0 < gb):
        raise NoSignChange(f"no sign change on [{a}, {b}]: ({ga}, {gb})")
    while not (math.isfinite(ga) and math.isfinite(gb)) and b - a > xtol:
        m = 0.5 * (a + b)
        gm = g(m)
        if abs(gm) <= tol:
            return m, abs(gm)
        if gm < 0:
            a, ga = m, gm
        else:
            b, gb = m, gm
    if math.isfinite(ga) and math.isfinite(gb):
        root = brentq(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
        cands = [root, a, b] + list(g.cache)
    else:
        cands = [a, b]
    best = min((c for c in cands if a <= c <= b and math.isfinite(g(c))), key=lambda c: abs(g(c)))
    return best, abs(g(best))


def tangency_point(params: Params, p_bracket=None, y_section: Optional[float] = None,
                   n_seeds: int = 400, seed_radius: float = 1e-3,
                   config: Optional[IntegratorConfig] = None, tol: float = 1e-8,
                   xtol: float = 1e-14, threads: int = 1):
    """``(p, |delta(p)|)``: the p at fixed ``params.s`` where the turn offset vanishes.

    ``delta`` is taken as +inf where W^s(q) no longer reaches the section.
    The default bracket is ``[p_H - 2 eps, p_H - 0.05 eps]`` with p_H the
    Hopf value at this s.
    """
    if y_section is None:
        y_section = default_section_height(params.eps, params.alpha_cubic)
    if p_bracket is None:
        ph = hopf_point(params)[0]
        p_bracket = (ph - 2 * params.eps, ph - 0.05 * params.eps)

    def fn(p, hint):
        try:
            r = turn_offset(params.replace(p=p), y_section, n_seeds, seed_radius, config,
                            hint=hint, threads=threads)
        except (EmptyTrace, OutOfRange):
            return math.inf, None
        return r.value, r.theta

    return _root_on_p(_Cached(fn), p_bracket[0], p_bracket[1], tol, xtol)


def tangency_curve(params_base: Params, s_range=(1.3, 1.45), n: int = 4, p_bracket=None,
                   y_section: Optional[float] = None, n_seeds: int = 400,
                   seed_radius: float = 1e-3, config=None, threads: int = 1) -> ParamCurve:
    """Curve of tangency between W^s(q) and E^u(C_{l,eps}) over ``n`` values of s."""
    rows, skipped = [], []
    for s in np.linspace(s_range[0], s_range[1], n):
        try:
            p, res = tangency_point(params_base.replace(s=float(s)), p_bracket, y_section, n_seeds,
                                    seed_radius, config, threads=threads)
            rows.append((p, s, res))
        except NoSignChange as exc:
            skipped.append((float(s), str(exc)))
    return _make_curve("Tangency", rows, skipped)


def distance_contour(params_base: Params, s_range=(1.3, 1.45), level: float = 0.01, n: int = 4,
                     p_bracket=None, y_section: Optional[float] = None, n_seeds: int = 400,
                     seed_radius: float = 1e-3, config=None, threads: int = 1) -> ParamCurve:
    """Curve where the section distance between W^s(q) and p_l equals ``level``.

    ``extra["side"]`` holds, per sample, the sign of d'(p): +1 means the
    distance exceeds ``level`` for larger p.
    """
    if not level > 0:
        raise ValueError("level must be positive")
    rows, skipped, sides = [], [], []
    for s in np.linspace(s_range[0], s_range[1], n):
        params = params_base.replace(s=float(s))
        ys = default_section_height(params.eps, params.alpha_cubic) if y_section is None else y_section
        if p_bracket is None:
            ph = hopf_point(params)[0]
            bracket = (ph - 2 * params.eps, ph - 0.05 * params.eps)
        else:
            bracket = p_bracket

        def fn(p, hint, params=params, ys=ys):
            try:
                r = trace_distance(params.replace(p=p), ys, n_seeds, seed_radius, config, hint=hint,
                                   threads=threads)
            except (EmptyTrace, OutOfRange):
                return math.inf, None
            return r.value - level, r.theta

        g = _Cached(fn)
        try:
            p, res = _root_on_p(g, bracket[0], bracket[1], 1e-8, 1e-14, either_sign=True)
        except NoSignChange as exc:
            skipped.append((float(s), str(exc)))
            continue
        rows.append((p, s, res))
        sides.append(1 if g(bracket[1]) > g(bracket[0]) else -1)
    order = np.argsort([r[1] for r in rows], kind="stable")
    return _make_curve("DistanceContour", rows, skipped, extra={"side": [sides[i] for i in order]})


# splitting -----------------------------------------------------------------

SPLIT_CONFIG = IntegratorConfig(max_time=30.0, escape_radius=10.0)


def splitting_side(params: Params, config: Optional[IntegratorConfig] = None) -> int:
    """Side to which the right-going branch of W^u(q) falls after its excursion to C_r.

    Returns -1 when, after x1 first exceeds 0.5, the orbit returns to
    ``x1 < x1_- - 0.1`` (a jump back towards C_l) and +1 when it leaves to the
    right instead (escape or ``x1 > 2``).

    Raises
    ------
    Inconclusive
        If neither happens before the horizon.
    """
    config = config or SPLIT_CONFIG
    br = wu_branches(params, config, t_span=config.max_time).toward_right
    x1 = br.y[:, 0]
    lo = fold_points(params.alpha_cubic)[0] - 0.1
    up = np.nonzero(x1 > 0.5)[0]
    if not up.size:
        if br.termination is Termination.ESCAPED:
            return 1 if x1[-1] > 0 else -1
        raise Inconclusive("W^u(q) never left the neighbourhood of C_l")
    after = x1[up[0]:]
    left = np.nonzero(after < lo)[0]
    right = np.nonzero(after > 2.0)[0]
    i_left = left[0] if left.size else math.inf
    i_right = right[0] if right.size else math.inf
    if i_left < i_right:
        return -1
    if i_right < i_left or br.termination is Termination.ESCAPED:
        return 1
    raise Inconclusive("no decision before the horizon")


def _bisect_sign(fn: Callable[[float], int], a: float, b: float, width: float):
    fa, fb = fn(a), fn(b)
    if fa == fb:
        raise NoSignChange(f"splitting side is {fa} at both ends of [{a}, {b}]")
    while b - a > width:
        m = 0.5 * (a + b)
        if fn(m) == fa:
            a = m
        else:
            b = m
    return 0.5 * (a + b), b - a


def splitting_point(params: Params, vary: str = "p", bracket=None, width: float = 1e-12,
                    config=None):
    """Location of the splitting flip, varying ``p`` (at fixed s) or ``s`` (at fixed p)."""
    if vary == "p":
        if bracket is None:
            bracket = (params.p - 0.02, params.p + 0.02)
        return _bisect_sign(lambda p: splitting_side(params.replace(p=p), config), *bracket, width)
    if vary == "s":
        if bracket is None:
            bracket = (params.s - 0.1, params.s + 0.1)
        return _bisect_sign(lambda s: splitting_side(params.replace(s=s), config), *bracket, width)
    raise ValueError("vary must be 'p' or 's'")


def splitting_curve(params_base: Params, s_range=(1.3, 1.45), n: int = 7, p_bracket=(0.0, 0.1),
                    width: float = 1e-10, config=None, threads: int = 1) -> ParamCurve:
    """Splitting proxy of the C-curve: bisection on p of :func:`splitting_side` at each s.

    The p bracket is first scanned on a grid of 21 points; the flip nearest
    to the Hopf side is refined.
    """

    def one(s):
        params = params_base.replace(s=float(s))
        grid = np.linspace(p_bracket[0], p_bracket[1], 21)
        sides = []
        for p in grid:
            try:
                sides.append(splitting_side(params.replace(p=float(p)), config))
            except Inconclusive:
                sides.append(0)
        flips = [k for k in range(20) if sides[k] * sides[k + 1] < 0]
        if not flips:
            return None, (float(s), "no splitting flip in the p bracket")
        k = flips[-1]
        p, w = splitting_point(params, "p", (grid[k], grid[k + 1]), width, config)
        return (p, float(s), w), None

    rows, skipped = [], []
    for row, skip in pmap(one, np.linspace(s_range[0], s_range[1], n), threads):
        if row is not None:
            rows.append(row)
        else:
            skipped.append(skip)
    return _make_curve("Splitting", rows, skipped, sort_col=0)


# Hopf ------------------------------------------------------------------------


def _hopf_real_part(params: Params) -> float:
    eig = eigen_analysis(params)
    if eig.has_complex_pair:
        return eig.complex_pair[0]
    # real spectrum next to the fold: count it as stable (no oscillatory instability)
    return -1.0


def hopf_point(params: Params, p_window=None, n_grid: int = 201):
    """``(p_H, |Re|)``: left Hopf point at fixed s, from a grid scan and Brent refinement."""
    p_lo = singular_hopf_limits(params.alpha_cubic)[0]
    if p_window is None:
        p_window = (p_lo - 2 * params.eps, p_lo + 10 * params.eps)
    grid = np.linspace(p_window[0], p_window[1], n_grid)
    vals = [_hopf_real_part(params.replace(p=float(p))) for p in grid]
    for k in range(n_grid - 1):
        if vals[k] < 0 <= vals[k + 1]:
            f = lambda p: _hopf_real_part(params.replace(p=p))
            if vals[k + 1] == 0:
                return float(grid[k + 1]), 0.0
            root = brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            return root, abs(f(root))
    raise NoSignChange("Re of the complex pair does not change sign in the p window")


def hopf_curve(params_base: Params, s_range=(1.2, 1.5), n: int = 7, threads: int = 1) -> ParamCurve:
    """Left branch of the Hopf curve, ``Re(complex pair) = 0``."""

    def one(s):
        try:
            p, r = hopf_point(params_base.replace(s=float(s)))
            return (p, float(s), r), None
        except NoSignChange as exc:
            return None, (float(s), str(exc))

    rows, skipped = [], []
    for row, skip in pmap(one, np.linspace(s_range[0], s_range[1], n), threads):
        (rows if row is not None else skipped).append(row if row is not None else skip)
    return _make_curve("Hopf", rows, skipped)


# tangency-to-Hopf distance -----------------------------------------------------------------------


@dataclass(frozen=True)
class TangencyHopfDistance:
    eps: float
    distance: float
    tangency_p: float
    tangency_s: float
    hopf_p: float
    hopf_s: float
    y_section: float
    iterations: int

    @property
    def ratio(self) -> float:
        return self.distance / self.eps


def tangency_hopf_distance(params_base: Params, eps: float, y_section: Optional[float] = None,
                           n_seeds: int = 400, seed_radius: float = 1e-3, s_tol: float = 1e-7,
                           max_iter: int = 8, threads: int = 1) -> TangencyHopfDistance:
    """Distance in (p, s) between the tangency point and the Hopf curve.

    The tangency point is where the tangency curve meets the splitting
    curve (the location of the sharp turn).  It is found by alternating a
    tangency solve in p at fixed s with a splitting solve in s at fixed p,
    starting from ``params_base.s``.  The distance to the Hopf curve is then
    minimised over s.
    """
    params = params_base.replace(eps=eps)
    if y_section is None:
        y_section = default_section_height(eps, params.alpha_cubic)
    s = params.s
    p_t = None
    for it in range(1, max_iter + 1):
        bracket = None
        if p_t is not None:
            bracket = (p_t - 0.5 * eps, p_t + 0.5 * eps)
        try:
            p_t, _ = tangency_point(params.replace(s=s), bracket, y_section, n_seeds, seed_radius,
                                    threads=threads)
        except NoSignChange:
            p_t, _ = tangency_point(params.replace(s=s), None, y_section, n_seeds, seed_radius,
                                    threads=threads)
        for half in (0.1, 0.25, 0.5):
            try:
                s_new, _ = splitting_point(params.replace(p=p_t, s=s), "s",
                                           (max(s - half, 1e-3), s + half), 1e-10)
                break
            except NoSignChange:
                continue
        else:
            raise NoSignChange(f"no splitting flip in s near {s} at p = {p_t}")
        done = abs(s_new - s) < s_tol
        s = s_new
        if done:
            break
    else:
        raise NoConvergence("tangency/splitting intersection did not converge")

    def dist(sv):
        ph = hopf_point(params.replace(s=sv))[0]
        return math.hypot(ph - p_t, sv - s)

    res = minimize_scalar(dist, bounds=(s - 0.05, s + 0.05), method="bounded",
                          options={"xatol": 1e-10})
    s_h = float(res.x)
    p_h = hopf_point(params.replace(s=s_h))[0]
    return TangencyHopfDistance(eps, float(res.fun), p_t, s, p_h, s_h, y_section, it)


# backward limit cycle ---------------------------------------------------------


@dataclass(frozen=True)
class PeriodicOrbit:
    period: float
    point: np.ndarray
    amplitude: float
    stability: str
    multipliers: tuple
    residual: float


def find_limit_cycle_backward(params: Params, config: Optional[IntegratorConfig] = None,
                              theta: float = 0.0, seed_radius: float = 1e-3,
                              max_returns: int = 5000, tol: float = 1e-8) -> PeriodicOrbit:
    """alpha-limit cycle of a W^s(q) orbit.

    A seed in W^s(q) near q is integrated backward; successive crossings of
    the plane ``y = y_seed`` in a fixed direction are compared until two
    agree to ``tol``.  The return point is then polished by Newton's method
    on the return map, and the forward Floquet multipliers are taken from
    the monodromy matrix.

    Raises
    ------
    Unbounded
        If the backward orbit escapes.
    NoConvergence
        If the returns do not settle within ``max_returns``.
    """
    config = config or IntegratorConfig(max_time=50.0)
    q, basis = stable_plane(params)
    x = _seed(q, basis, seed_radius, theta)
    level = float(x[2])
    prev = None
    direction = None
    for _ in range(max_returns):
        try:
            tr = integrate_to_section(params, x, "backward", level, config, crossing=direction or 0,
                                      skip_start=True, record=False)
        except HorizonReached:
            raise NoConvergence("no return to the section within the horizon") from None
        if tr.termination is Termination.ESCAPED:
            raise Unbounded("the backward W^s(q) orbit escaped")
        if direction is None:
            direction = tr.event.direction
        x = tr.event.state.copy()
        x[2] = level
        if prev is not None and np.max(np.abs(x - prev)) <= tol:
            break
        prev = x
    else:
        raise NoConvergence("section returns did not converge")

    # Newton on the backward return map (contracting) in the plane y = level
    ev = (2, level, direction, True)
    T = None
    for _ in range(30):
        traj, z, M = integrate_variational(params, x, config.max_time, "backward", config, event=ev)
        if traj.event is None:
            raise NoConvergence("backward return not found")
        T = abs(traj.event.time)
        f = fhn_rhs(z, params)
        # derivative of the return map including the hitting-time correction
        P = M - np.outer(f, M[2]) / f[2]
        r = (z - x)[:2]
        if np.max(np.abs(r)) < 1e-13:
            break
        x = x.copy()
        x[:2] -= np.linalg.solve(P[:2, :2] - np.eye(2), r)
    else:
        raise NoConvergence("Newton polish of the periodic orbit did not converge")
    traj, z, Mb = integrate_variational(params, x, T, "backward", config)
    residual = float(np.max(np.abs(z - x)))
    mults = 1.0 / np.linalg.eigvals(Mb)
    order = np.argsort(np.abs(np.log(np.abs(mults))))
    nontrivial = tuple(complex(m) for m in mults[order[1:]])
    stable = "CompletelyUnstable" if all(abs(m) > 1 for m in nontrivial) else "Other"
    orbit = integrate("full", params, x, "backward", config, t_span=T)
    xs = orbit(np.linspace(0, -T, 2001))[:, 0]
    return PeriodicOrbit(float(T), x.copy(), float(xs.max() - xs.min()), stable, nontrivial, residual)
