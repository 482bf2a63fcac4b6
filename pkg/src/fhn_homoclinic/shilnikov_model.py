"""Geometric return-map model of a Shilnikov saddle-focus homoclinic orbit.

Near the equilibrium the flow is the linear field

    u' = -beta u - alpha v,   v' = alpha u - beta v,   w' = gamma w,

giving the exact flow map F12 from Sigma1 = {u = 0, w > 0} to
Sigma2 = {w = 1}.  The global return F21 from a thin strip of Sigma2 back to
Sigma1 is quadratic.  Everything here is closed form; no integration is
involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .core_model import Params, eigen_analysis
from .errors import AllRealEigenvalues, DomainViolation, NoHomoclinic, SignPattern

SIGMA1 = "Sigma1"
SIGMA2 = "Sigma2"


@dataclass(frozen=True)
class ShilnikovModelParams:
    """Rates of the linear field and the coefficients of the global return.

    ``rho`` and ``sigma`` stand for exponentially large/small quantities of
    the fast-slow problem and are free inputs here.
    """

    alpha_rot: float
    beta: float
    gamma: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    rho: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.alpha_rot > 0 and self.gamma > 0 and self.rho > 0):
            raise ValueError("alpha_rot, gamma and rho must be positive")
        if self.beta < 0 or self.sigma < 0:
            raise ValueError("beta and sigma must be non-negative")

    def replace(self, **changes) -> "ShilnikovModelParams":
        d = asdict(self)
        d.update(changes)
        return ShilnikovModelParams(**d)


@dataclass(frozen=True)
class ModelPoint:
    """A point on one of the two sections.

    On Sigma1 the coordinates are ``(v, w)``, on Sigma2 ``(u, v)``.  A
    Sigma1 point with ``w <= 0`` lies in the plane u = 0 but on or beyond
    W^s(0); it cannot return.
    """

    section: str
    c1: float
    c2: float

    def __post_init__(self):
        if self.section not in (SIGMA1, SIGMA2):
            raise ValueError(f"unknown section {self.section!r}")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.c1, self.c2])

    @property
    def v(self) -> float:
        return self.c1 if self.section == SIGMA1 else self.c2

    @property
    def w(self) -> float:
        if self.section != SIGMA1:
            return 1.0
        return self.c2

    @property
    def u(self) -> float:
        if self.section != SIGMA2:
            return 0.0
        return self.c1


@dataclass(frozen=True)
class Lost:
    """Outcome of a return that leaves the model domain."""

    reason: str
    point: ModelPoint


def f12_domain(model: ShilnikovModelParams) -> Tuple[float, float]:
    """Admissible v-interval on Sigma1: one turn of a W^s(0) spiral."""
    return (math.exp(-2.0 * math.pi * model.beta / model.alpha_rot), 1.0)


def _f12_raw(v, w, m):
    c = m.beta / m.gamma
    phi = -(m.alpha_rot / m.gamma) * math.log(w)
    r = v * w**c
    return r * math.cos(phi), r * math.sin(phi)


def _f12_jac(v, w, m):
    c, a = m.beta / m.gamma, m.alpha_rot / m.gamma
    phi = -a * math.log(w)
    cs, sn = math.cos(phi), math.sin(phi)
    wc = w**c
    return np.array([[wc * cs, v * w ** (c - 1) * (c * cs + a * sn)],
                     [wc * sn, v * w ** (c - 1) * (c * sn - a * cs)]])


def f12(point, model: ShilnikovModelParams, strict: bool = True) -> ModelPoint:
    """Exact flow map Sigma1 -> Sigma2 of the linear field.

    ``point`` is a Sigma1 :class:`ModelPoint` or a ``(v, w)`` pair.

    Raises
    ------
    DomainViolation
        If ``w`` is not in (0, 1] or, with ``strict``, ``v`` is outside
        :func:`f12_domain`.
    """
    v, w = _sigma1_coords(point)
    if not (0.0 < w <= 1.0):
        raise DomainViolation(f"w = {w} is not in (0, 1]")
    if strict:
        lo, hi = f12_domain(model)
        if not (lo <= v <= hi):
            raise DomainViolation(f"v = {v} is outside [{lo}, {hi}]")
    u2, v2 = _f12_raw(v, w, model)
    return ModelPoint(SIGMA2, u2, v2)


def _sigma1_coords(point):
    if isinstance(point, ModelPoint):
        if point.section != SIGMA1:
            raise DomainViolation("expected a point on Sigma1")
        return point.c1, point.c2
    v, w = point
    return float(v), float(w)


def _sigma2_coords(point):
    if isinstance(point, ModelPoint):
        if point.section != SIGMA2:
            raise DomainViolation("expected a point on Sigma2")
        return point.c1, point.c2
    u, v = point
    return float(u), float(v)


def in_f21_domain(u: float, v: float, model: ShilnikovModelParams) -> bool:
    return model.lambda1 <= u <= model.lambda1 + 1.0 / model.rho and -1.0 <= v <= 1.0


def _f21_raw(u, v, m):
    du = u - m.lambda1
    return m.rho * du + m.lambda3, m.sigma * v + m.lambda2 - m.rho**2 * du * du


def _f21_jac(u, v, m):
    du = u - m.lambda1
    return np.array([[m.rho, 0.0], [-2.0 * m.rho**2 * du, m.sigma]])


def f21(point, model: ShilnikovModelParams, strict: bool = True) -> ModelPoint:
    """Global return Sigma2 -> plane u = 0, returned as ``(v, w)`` on Sigma1.

    With ``strict=False`` the formula is evaluated outside the strip
    ``[lambda1, lambda1 + 1/rho] x [-1, 1]`` (diagnostic mode).
    """
    u, v = _sigma2_coords(point)
    if strict and not in_f21_domain(u, v, model):
        raise DomainViolation(f"({u}, {v}) is outside the F21 strip")
    v1, w1 = _f21_raw(u, v, model)
    return ModelPoint(SIGMA1, v1, w1)


def wu_probe(model: ShilnikovModelParams) -> ModelPoint:
    """Image of W^u(0) ∩ Sigma2 = (0, 0) under F21 (diagnostic mode)."""
    return f21((0.0, 0.0), model, strict=False)


def _half_turns(v, m):
    """Number of half turns of the linear flow taking (0, v) into the F12 domain.

    Along the flow a half turn maps (v, w) on the plane u = 0 to
    ``(-v e^{-pi beta/alpha}, w e^{pi gamma/alpha})``.  Returns None when no
    representative exists (v = 0 or beta = 0 with |v| != 1).
    """
    if v == 0.0:
        return None
    if m.beta == 0.0:
        return 0 if v == 1.0 else None
    k = math.pi * m.beta / m.alpha_rot
    want = 0 if v > 0 else 1
    n = math.ceil(math.log(abs(v)) / k - 1e-12)
    if (n - want) % 2:
        n += 1
    lo = math.exp(-2.0 * math.pi * m.beta / m.alpha_rot)
    if not lo <= abs(v) * math.exp(-n * k) <= 1.0:
        return None
    return n


def _reduce(v, w, m):
    n = _half_turns(v, m)
    if n is None:
        return None
    k = math.pi * m.beta / m.alpha_rot
    g = math.pi * m.gamma / m.alpha_rot
    sign = -1.0 if n % 2 else 1.0
    return n, sign * math.exp(-n * k), math.exp(n * g)


def to_fundamental_domain(point, model: ShilnikovModelParams) -> Union[ModelPoint, Lost]:
    """Representative in the F12 domain of the orbit through a point of the plane u = 0.

    The exact linear flow is used, so the representative has the same F12
    image.  :class:`Lost` when w <= 0 or when the orbit reaches Sigma2 first.
    """
    v, w = _sigma1_coords(point)
    p = ModelPoint(SIGMA1, v, w)
    if w <= 0.0:
        return Lost("returned on or beyond W^s(0)", p)
    red = _reduce(v, w, model)
    if red is None:
        return Lost("no representative in the F12 domain", p)
    _, sv, sw = red
    if w * sw > 1.0:
        return Lost("reaches Sigma2 before the F12 domain", p)
    return ModelPoint(SIGMA1, v * sv, w * sw)


def return_map(point, model: ShilnikovModelParams) -> Union[ModelPoint, Lost]:
    """F21 ∘ F12 followed by :func:`to_fundamental_domain`.

    :class:`Lost` when the F12 image misses the F21 strip or the F21 image
    cannot return.
    """
    p2 = f12(point, model)
    if not in_f21_domain(p2.c1, p2.c2, model):
        return Lost("missed the F21 strip", p2)
    return to_fundamental_domain(f21(p2, model), model)


def homoclinic_parameters(model: ShilnikovModelParams) -> Tuple[float, float]:
    """The two values of lambda1 for which F21 maps W^u(0) onto W^s(0).

    Raises
    ------
    NoHomoclinic
        If ``lambda2 < 0``.  At ``lambda2 = 0`` both values coincide at 0.
    """
    if model.lambda2 < 0:
        raise NoHomoclinic("lambda2 must be non-negative")
    r = math.sqrt(model.lambda2) / model.rho
    return (r, -r)


def recurrence_check(model: ShilnikovModelParams) -> bool:
    """True iff the F21 image reaches w > 0, i.e. ``sigma + lambda2 > 0``."""
    return model.sigma + model.lambda2 > 0


def max_image_w(model: ShilnikovModelParams) -> float:
    """Maximum of the w-component of F21 over its strip."""
    return model.sigma + model.lambda2


# periodic points ----------------------------------------------------------


def _admissible(x, m):
    lo, hi = f12_domain(m)
    return lo <= x[0] <= hi and 0.0 < x[1] <= 1.0


def _iterate(x, m, k):
    """k-fold return map on raw coordinates with its Jacobian; None when lost."""
    J = np.eye(2)
    for _ in range(k):
        if not _admissible(x, m):
            return None, None
        u, v2 = _f12_raw(x[0], x[1], m)
        if not in_f21_domain(u, v2, m):
            return None, None
        J = _f21_jac(u, v2, m) @ _f12_jac(x[0], x[1], m) @ J
        v1, w1 = _f21_raw(u, v2, m)
        red = _reduce(v1, w1, m) if w1 > 0.0 else None
        if red is None or w1 * red[2] > 1.0:
            return None, None
        J = np.diag([red[1], red[2]]) @ J
        x = np.array([v1 * red[1], w1 * red[2]])
    return x, J


def _newton(x, m, k, tol=1e-12, max_iter=50):
    for _ in range(max_iter):
        y, J = _iterate(x, m, k)
        if y is None:
            return None
        r = y - x
        if np.max(np.abs(r)) <= tol:
            return x
        try:
            dx = np.linalg.solve(J - np.eye(2), -r)
        except np.linalg.LinAlgError:
            return None
        # damp steps that would leave the admissible set
        lam = 1.0
        while lam > 1e-6 and _iterate(x + lam * dx, m, k)[0] is None:
            lam *= 0.5
        x = x + lam * dx
    y, _ = _iterate(x, m, k)
    return x if y is not None and np.max(np.abs(y - x)) <= tol else None


@dataclass(frozen=True)
class PeriodicPoint:
    period: int
    point: ModelPoint
    residual: float
    multipliers: tuple


def _w_floor(m):
    """Smallest w whose F12 image can reach the F21 strip (clamped)."""
    lo, hi = m.lambda1, m.lambda1 + 1.0 / m.rho
    d = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    if d == 0.0:
        d = 1e-3 / m.rho
    if m.beta == 0.0:
        return 1e-300 if d <= 1.0 else 1.0
    return min(1.0, max(1e-300, d ** (m.gamma / m.beta)))


def find_periodic_points(model: ShilnikovModelParams, max_period: int = 1, grid: int = 100,
                         near: Optional[float] = None, tol: float = 1e-12,
                         dedup: float = 1e-6) -> List[PeriodicPoint]:
    """Periodic points of :func:`return_map` up to ``max_period``.

    A ``grid x grid`` lattice covers the admissible rectangle of Sigma1: the
    v-interval of :func:`f12_domain` times w in ``[w_min, w_max]``.  Here
    ``w_max = min(1, sigma + lambda2)`` bounds every return and ``w_min`` is
    the smallest height whose F12 image can still reach the strip.  The
    w-axis is geometric because the spiral accumulates at w = 0.  Lattice
    points that survive k returns (and, if ``near`` is given, come back
    within ``near``) are polished by Newton's method on ``R^k - id``.
    Points of lower minimal period and repeated orbit points are discarded.
    Results are sorted by period and then lexicographically.
    """
    if not recurrence_check(model):
        return []
    lo, hi = f12_domain(model)
    w_max = min(1.0, max_image_w(model))
    vs = np.linspace(lo, hi, grid)
    ws = np.geomspace(min(_w_floor(model), w_max), w_max, grid)
    found: List[PeriodicPoint] = []
    orbits: List[np.ndarray] = []
    for k in range(1, max_period + 1):
        for v in vs:
            for w in ws:
                x0 = np.array([v, w])
                y, _ = _iterate(x0, model, k)
                if y is None or (near is not None and np.max(np.abs(y - x0)) > near):
                    continue
                x = _newton(x0, model, k, tol)
                if x is None:
                    continue
                if any(_iterate(x, model, j)[0] is not None
                       and np.max(np.abs(_iterate(x, model, j)[0] - x)) <= dedup
                       for j in range(1, k) if k % j == 0):
                    continue
                if any(np.min(np.linalg.norm(orb - x, axis=1)) <= dedup for orb in orbits):
                    continue
                orb = [x]
                for _ in range(k - 1):
                    orb.append(_iterate(orb[-1], model, 1)[0])
                orbits.append(np.array(orb))
                y, J = _iterate(x, model, k)
                found.append(PeriodicPoint(k, ModelPoint(SIGMA1, float(x[0]), float(x[1])),
                                           float(np.max(np.abs(y - x))),
                                           tuple(complex(e) for e in np.linalg.eigvals(J))))
    found.sort(key=lambda pp: (pp.period, pp.point.c1, pp.point.c2))
    return found


# calibration ----------------------------------------------------------------


def calibrate_from_fhn(params: Params, **rest) -> ShilnikovModelParams:
    """Rates ``alpha_rot, beta, gamma`` from the spectrum of the FHN equilibrium.

    ``beta = -Re``, ``alpha_rot = |Im|`` of the complex pair and ``gamma``
    the real eigenvalue, all in slow time.  The remaining model
    coefficients are not determined by the spectrum; pass them as keyword
    arguments.

    Raises
    ------
    AllRealEigenvalues
        If q has no complex pair.
    SignPattern
        If the pair is unstable or the real eigenvalue is not positive.
    """
    eig = eigen_analysis(params)
    if not eig.has_complex_pair:
        raise AllRealEigenvalues("q is not a focus")
    re, im = eig.complex_pair
    if re > 0 or eig.real_eig <= 0:
        raise SignPattern(f"spectrum ({eig.real_eig}, {re} ± {im}i) is not a saddle-focus")
    return ShilnikovModelParams(alpha_rot=im, beta=-re, gamma=eig.real_eig, **rest)


def analysis_json(model: ShilnikovModelParams, max_period: int = 1, grid: int = 100) -> str:
    """JSON summary: periodic points, homoclinic lambda1 values and recurrence."""
    try:
        lams: Optional[list] = list(homoclinic_parameters(model))
    except NoHomoclinic:
        lams = []
    pts = find_periodic_points(model, max_period, grid)
    out = {
        "model": asdict(model),
        "fixed_points": [
            {"period": pp.period, "v": pp.point.c1, "w": pp.point.c2, "residual": pp.residual}
            for pp in pts
        ],
        "homoclinic_lambda1": lams,
        "recurrent": recurrence_check(model),
    }
    return json.dumps(out, indent=2)
