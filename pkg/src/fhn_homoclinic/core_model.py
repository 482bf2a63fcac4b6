"""FitzHugh-Nagumo travelling-wave vector field and its singular-limit objects.

The system, on the slow time scale, reads::

    eps * x1' = x2
    eps * x2' = (s*x2 - f(x1) + y - p) / delta
          y'  = (x1 - y) / s

with the cubic ``f(x1) = x1 (x1 - 1) (alpha - x1)``.  The fast time scale is
obtained by multiplying every component by ``eps``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import AllRealEigenvalues, MultipleEquilibria, NoRealFolds

Scale = Literal["fast", "slow"]
Branch = Literal["left", "middle", "right", "fold_lo", "fold_hi"]

# imaginary parts below this are treated as a real spectrum
COMPLEX_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Params:
    """Parameters of the FitzHugh-Nagumo travelling wave system.

    Defaults for ``delta`` and ``alpha_cubic`` are the values used for all
    numerical work (``delta = 5``, ``alpha = 1/10``).
    """

    p: float = 0.05
    s: float = 1.37
    delta: float = 5.0
    alpha_cubic: float = 0.1
    eps: float = 0.01

    def __post_init__(self):
        for name in ("p", "s", "delta", "alpha_cubic", "eps"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)

    def as_array(self) -> np.ndarray:
        """Packed ``[p, s, delta, alpha, eps]`` used by the compiled kernels."""
        return np.array([self.p, self.s, self.delta, self.alpha_cubic, self.eps])


def cubic_f(x1, alpha_cubic=0.1):
    return x1 * (x1 - 1.0) * (alpha_cubic - x1)


def cubic_df(x1, alpha_cubic=0.1):
    return -3.0 * x1 * x1 + 2.0 * (1.0 + alpha_cubic) * x1 - alpha_cubic


def cubic_d2f(x1, alpha_cubic=0.1):
    return -6.0 * x1 + 2.0 * (1.0 + alpha_cubic)


def fhn_rhs(state, params: Params, scale: Scale = "slow") -> np.ndarray:
    """Right-hand side of the vector field on the requested time scale.

    With ``scale="fast"`` and ``eps == 0`` the layer equations are returned
    (the slow component vanishes).
    """
    x1, x2, y = (float(c) for c in state)
    s, delta, eps = params.s, params.delta, params.eps
    fast1 = x2
    fast2 = (s * x2 - cubic_f(x1, params.alpha_cubic) + y - params.p) / delta
    slow = (x1 - y) / s
    if scale == "fast":
        return np.array([fast1, fast2, eps * slow])
    if scale == "slow":
        if eps == 0:
            raise ZeroDivisionError("slow time scale is undefined for eps = 0")
        return np.array([fast1 / eps, fast2 / eps, slow])
    raise ValueError(f"unknown scale {scale!r}")


def fhn_jacobian(state, params: Params, scale: Scale = "slow") -> np.ndarray:
    x1 = float(state[0])
    s, delta, eps = params.s, params.delta, params.eps
    jac = np.array(
        [
            [0.0, 1.0, 0.0],
            [-cubic_df(x1, params.alpha_cubic) / delta, s / delta, 1.0 / delta],
            [eps / s, 0.0, -eps / s],
        ]
    )
    if scale == "fast":
        return jac
    if scale == "slow":
        if eps == 0:
            raise ZeroDivisionError("slow time scale is undefined for eps = 0")
        return jac / eps
    raise ValueError(f"unknown scale {scale!r}")


def layer_jacobian(x1, params: Params) -> np.ndarray:
    """2x2 Jacobian of the fast subsystem in (x1, x2) with y frozen."""
    return np.array(
        [[0.0, 1.0], [-cubic_df(x1, params.alpha_cubic) / params.delta, params.s / params.delta]]
    )


def fold_points(alpha_cubic=0.1):
    """Abscissas ``(x1_lo, x1_hi)`` of the two folds, where ``f'(x1) = 0``."""
    a, b, c = -3.0, 2.0 * (1.0 + alpha_cubic), -alpha_cubic
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise NoRealFolds(f"f' has no real roots for alpha={alpha_cubic}")
    sq = math.sqrt(disc)
    # cancellation-free form of the quadratic formula
    q = -0.5 * (b + math.copysign(sq, b))
    r1, r2 = q / a, c / q
    return (min(r1, r2), max(r1, r2))


def singular_hopf_limits(alpha_cubic=0.1):
    """Values ``p_lo < p_hi`` at which the equilibrium sits on a fold."""
    lo, hi = fold_points(alpha_cubic)
    p_lo = lo - cubic_f(lo, alpha_cubic)
    p_hi = hi - cubic_f(hi, alpha_cubic)
    return (p_lo, p_hi)


@dataclass(frozen=True)
class CriticalManifoldInfo:
    fold_lo: float
    fold_hi: float
    alpha_cubic: float
    p: float

    def branch(self, x1) -> Branch:
        if x1 == self.fold_lo:
            return "fold_lo"
        if x1 == self.fold_hi:
            return "fold_hi"
        if x1 < self.fold_lo:
            return "left"
        if x1 > self.fold_hi:
            return "right"
        return "middle"

    def y_of(self, x1):
        return cubic_f(x1, self.alpha_cubic) + self.p

    @property
    def fold_y(self):
        return (self.y_of(self.fold_lo), self.y_of(self.fold_hi))


def critical_manifold(params: Params) -> CriticalManifoldInfo:
    lo, hi = fold_points(params.alpha_cubic)
    return CriticalManifoldInfo(lo, hi, params.alpha_cubic, params.p)


def critical_x1(y, params: Params, branch: Branch = "left") -> float:
    """Solve ``f(x1) + p = y`` for x1 on the requested branch of C_0."""
    info = critical_manifold(params)
    alpha = params.alpha_cubic
    target = y - params.p

    def g(x):
        return cubic_f(x, alpha) - target

    y_lo, y_hi = info.fold_y
    if branch == "left":
        if y < y_lo:
            raise ValueError(f"y={y} below the left fold value {y_lo}")
        a, b = info.fold_lo - 1.0, info.fold_lo
        while g(a) < 0:
            a -= 2.0 * (b - a)
    elif branch == "right":
        if y > y_hi:
            raise ValueError(f"y={y} above the right fold value {y_hi}")
        a, b = info.fold_hi, info.fold_hi + 1.0
        while g(b) > 0:
            b += 2.0 * (b - a)
    elif branch == "middle":
        if not (y_lo <= y <= y_hi):
            raise ValueError(f"y={y} outside the middle branch range [{y_lo}, {y_hi}]")
        a, b = info.fold_lo, info.fold_hi
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if g(a) == 0:
        return a
    if g(b) == 0:
        return b
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _equilibrium_cubic(x, params):
    return x - cubic_f(x, params.alpha_cubic) - params.p


def equilibrium(params: Params) -> np.ndarray:
    """The equilibrium q = (x, 0, x) with ``x - f(x) = p``."""
    alpha = params.alpha_cubic
    # g(x) = x^3 - (1+a) x^2 + (1+a) x - p ; g' has real roots iff alpha not in (-1, 2)
    c = 1.0 + alpha
    disc = 4.0 * c * c - 12.0 * c
    if disc > 0:
        sq = math.sqrt(disc)
        crit = sorted([(2.0 * c - sq) / 6.0, (2.0 * c + sq) / 6.0])
        g_max = _equilibrium_cubic(crit[0], params)
        g_min = _equilibrium_cubic(crit[1], params)
        if g_max >= 0 and g_min <= 0:
            raise MultipleEquilibria(f"several equilibria for p={params.p}, alpha={alpha}")

    lo, hi = -1.0, 1.0
    while _equilibrium_cubic(lo, params) > 0:
        lo *= 2.0
    while _equilibrium_cubic(hi, params) < 0:
        hi *= 2.0
    while hi - lo > 1e-14 * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if _equilibrium_cubic(mid, params) > 0:
            hi = mid
        else:
            lo = mid
        if mid in (lo, hi) and hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = 1.0 - cubic_df(x, alpha)
        if d == 0:
            break
        x_new = x - _equilibrium_cubic(x, params) / d
        if abs(_equilibrium_cubic(x_new, params)) >= abs(_equilibrium_cubic(x, params)):
            break
        x = x_new
    return np.array([x, 0.0, x])


# --- eigenvalues of 3x3 matrices through the characteristic cubic -----------


def char_poly(matrix) -> np.ndarray:
    """Coefficients ``[a2, a1, a0]`` of ``det(lam I - M) = lam^3 + a2 lam^2 + a1 lam + a0``."""
    m = np.asarray(matrix, dtype=float)
    tr = np.trace(m)
    minors = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    return np.array([-tr, minors, -np.linalg.det(m)])


def _cubic_roots(a2, a1, a0):
    """Roots of the monic cubic, real root first; Newton-polished."""

    def poly(z):
        return ((z + a2) * z + a1) * z + a0

    def dpoly(z):
        return (3.0 * z + 2.0 * a2) * z + a1

    # closed-form (trigonometric / Cardano) starting values
    start = np.roots([1.0, a2, a1, a0])
    real_idx = int(np.argmin(np.abs(start.imag)))
    r = float(start[real_idx].real)
    # bracket the real root for safety, then Newton
    scale = 1.0 + abs(a2) + abs(a1) ** 0.5 + abs(a0) ** (1.0 / 3.0)
    for _ in range(50):
        d = dpoly(r)
        if d == 0:
            break
        step = poly(r) / d
        r_new = r - step
        if abs(step) <= 1e-16 * max(abs(r), scale) or abs(poly(r_new)) >= abs(poly(r)):
            if abs(poly(r_new)) < abs(poly(r)):
                r = r_new
            break
        r = r_new
    b1 = a2 + r
    b0 = -a0 / r if abs(r) > 1.0 else a1 + r * b1
    disc = b1 * b1 - 4.0 * b0
    if disc < 0:
        pair = [complex(-0.5 * b1, 0.5 * math.sqrt(-disc)), complex(-0.5 * b1, -0.5 * math.sqrt(-disc))]
    else:
        sq = math.sqrt(disc)
        q = -0.5 * (b1 + math.copysign(sq, b1))
        pair = [complex(q), complex(b0 / q)] if q != 0 else [0j, complex(-b1)]
    polished = []
    for z in pair:
        for _ in range(20):
            d = dpoly(z)
            if d == 0:
                break
            step = poly(z) / d
            z_new = z - step
            if abs(poly(z_new)) >= abs(poly(z)):
                break
            z = z_new
        polished.append(z)
    return r, polished


def _null_vector(m: np.ndarray) -> np.ndarray:
    """Kernel vector of a (near) singular 3x3 matrix via the largest row cross product."""
    best = None
    best_norm = -1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = np.cross(m[i], m[j])
        n = np.sqrt(np.sum(np.abs(v) ** 2))
        if n > best_norm:
            best, best_norm = v, n
    return best / best_norm


@dataclass(frozen=True)
class EigenData:
    """Spectrum of the linearization at q.

    ``complex_pair`` is ``None`` when all three eigenvalues are real; the
    frame is then the matrix of real eigenvectors.
    """

    real_eig: float
    complex_pair: Optional[tuple]  # (real part, |imag part|)
    frame: np.ndarray
    jacobian: np.ndarray
    eigenvalues: tuple
    scale: str

    @property
    def has_complex_pair(self) -> bool:
        return self.complex_pair is not None

    def block_form(self) -> np.ndarray:
        """Real block-diagonal matrix B with ``J @ frame == frame @ B``."""
        if not self.has_complex_pair:
            return np.diag([ev.real for ev in self.eigenvalues])
        a, b = self.complex_pair
        return np.array([[self.real_eig, 0.0, 0.0], [0.0, a, b], [0.0, -b, a]])


def eigen_analysis(params: Params, scale: Scale = "slow") -> EigenData:
    """Eigenvalues and Jordan-type real frame of the linearization at q."""
    q = equilibrium(params)
    jac = fhn_jacobian(q, params, scale)
    a2, a1, a0 = char_poly(jac)
    r, pair = _cubic_roots(a2, a1, a0)
    mu = pair[0]
    if abs(mu.imag) > COMPLEX_THRESHOLD * max(1.0, abs(r)):
        v_real = _null_vector(jac - r * np.eye(3)).real
        w = _null_vector(jac.astype(complex) - mu * np.eye(3))
        if mu.imag < 0:
            mu, w = mu.conjugate(), w.conjugate()
        # normalise phase so the real part is as large as possible
        phase = 0.5 * np.angle(np.sum(w * w))
        w = w * np.exp(-1j * phase)
        frame = np.column_stack([v_real, w.real, w.imag])
        return EigenData(
            real_eig=r,
            complex_pair=(mu.real, abs(mu.imag)),
            frame=frame,
            jacobian=jac,
            eigenvalues=(complex(r), mu, mu.conjugate()),
            scale=scale,
        )
    evs = sorted([r, pair[0].real, pair[1].real])
    frame = np.column_stack([_null_vector(jac - ev * np.eye(3)).real for ev in evs])
    return EigenData(
        real_eig=r,
        complex_pair=None,
        frame=frame,
        jacobian=jac,
        eigenvalues=tuple(complex(ev) for ev in evs),
        scale=scale,
    )


def shilnikov_condition(eig: EigenData) -> bool:
    """True iff the real eigenvalue dominates the real part of the complex pair."""
    if not eig.has_complex_pair:
        raise AllRealEigenvalues("Shilnikov condition needs a complex pair")
    return abs(eig.real_eig) > abs(eig.complex_pair[0])


def degree_one_coefficient(params: Params, scale: Scale = "fast") -> float:
    """Coefficient of ``lam`` in the characteristic polynomial at q."""
    q = equilibrium(params)
    return float(char_poly(fhn_jacobian(q, params, scale))[1])


def branch_classifier(params: Params) -> Callable[[float], Branch]:
    return critical_manifold(params).branch
