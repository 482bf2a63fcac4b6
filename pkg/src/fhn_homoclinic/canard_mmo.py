"""Backward-flow canards along the middle branch and L^s mixed-mode signatures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .core_model import Params, cubic_f, equilibrium
from .errors import EmptyTrace, FHNError, Inconclusive, NoOscillations, NoSignChange
from .integrator import IntegratorConfig, Termination, Trajectory, integrate
from .manifold_scan import ParamCurve, _make_curve, pmap, stable_plane, unstable_direction
from .slow_manifold import _folds

UNBOUNDED = "UnboundedEscape"
BOUNDED = "BoundedAlphaLimit"

CANARD_CONFIG = IntegratorConfig(max_time=200.0)


@dataclass(frozen=True, eq=False)
class CanardClass:
    tag: str
    witness: Trajectory = field(repr=False)

    @property
    def escapes(self) -> bool:
        return self.tag == UNBOUNDED


def middle_seed(params: Params, fraction: float = 0.5) -> np.ndarray:
    """Point of C_m at ``x1 = x1_- + fraction (x1_+ - x1_-)``."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    lo, hi = _folds(params.alpha_cubic)
    x1 = lo + fraction * (hi - lo)
    return np.array([x1, 0.0, cubic_f(x1, params.alpha_cubic) + params.p])


def canard_classify(params: Params, config: Optional[IntegratorConfig] = None,
                    fraction: float = 0.5, start=None) -> CanardClass:
    """Backward fate of the orbit through a point of the middle branch C_m.

    ``UnboundedEscape`` if the backward orbit leaves the ball of radius
    ``config.escape_radius`` within ``config.max_time``, ``BoundedAlphaLimit``
    otherwise.  ``start`` overrides the seed on C_m.

    Raises
    ------
    Inconclusive
        If the horizon is reached while the state norm is still in
        ``[escape_radius / 2, escape_radius]``.
    """
    if not params.eps > 0:
        raise ValueError("eps must be positive")
    config = config or CANARD_CONFIG
    x0 = middle_seed(params, fraction) if start is None else np.asarray(start, dtype=float)
    traj = integrate("full", params, x0, "backward", config)
    if traj.termination is Termination.ESCAPED:
        return CanardClass(UNBOUNDED, traj)
    if np.linalg.norm(traj.y[-1, :3]) >= 0.5 * config.escape_radius:
        raise Inconclusive("still large at the time horizon")
    return CanardClass(BOUNDED, traj)


def canard_boundary_point(params: Params, p_bracket=(0.0, 0.12), width: float = 1e-6,
                          config: Optional[IntegratorConfig] = None, fraction: float = 0.5,
                          grid_step: float = 0.005):
    """``(p*, bracket width)`` where the canard class flips at fixed s.

    The bracket is first scanned with step ``grid_step``; the first flip
    found is refined by bisection.

    Raises
    ------
    NoSignChange
        If the class does not change on the bracket.
    """

    def escapes(p):
        return canard_classify(params.replace(p=p), config, fraction).escapes

    n = max(2, int(round((p_bracket[1] - p_bracket[0]) / grid_step)) + 1)
    grid = np.linspace(p_bracket[0], p_bracket[1], n)
    classes = [escapes(float(p)) for p in grid]
    flips = [k for k in range(n - 1) if classes[k] != classes[k + 1]]
    if not flips:
        raise NoSignChange("canard class does not change on the p bracket")
    a, b = float(grid[flips[0]]), float(grid[flips[0] + 1])
    ca = classes[flips[0]]
    while b - a > width:
        m = 0.5 * (a + b)
        if escapes(m) == ca:
            a = m
        else:
            b = m
    return 0.5 * (a + b), b - a


def canard_boundary(params_base: Params, s_range=(1.2, 1.4), n: int = 3, p_bracket=(0.0, 0.12),
                    width: float = 1e-6, config=None, fraction: float = 0.5,
                    threads: int = 1) -> ParamCurve:
    """Curve in (p, s) where backward canards along C_m begin."""

    def one(s):
        try:
            p, w = canard_boundary_point(params_base.replace(s=float(s)), p_bracket, width, config,
                                         fraction)
            return (p, float(s), w), None
        except NoSignChange as exc:
            return None, (float(s), str(exc))

    rows, skipped = [], []
    for row, skip in pmap(one, np.linspace(s_range[0], s_range[1], n), threads):
        (rows if row is not None else skipped).append(row if row is not None else skip)
    return _make_curve("CanardBoundary", rows, skipped)


# MMO signatures ---------------------------------------------------------------


@dataclass(frozen=True)
class MmoSignature:
    """Sequence of ``(L, s)`` blocks and the thresholds used to build it.

    ``pattern`` is the shortest block word that generates ``blocks`` by
    repetition, rotated to its lexicographically smallest form.
    """

    blocks: Tuple[Tuple[int, int], ...]
    large_threshold: float
    small_band: Tuple[float, float]

    @property
    def pattern(self) -> Tuple[Tuple[int, int], ...]:
        b = list(self.blocks)
        if not b:
            return ()
        for k in range(1, len(b) + 1):
            if all(b[i] == b[i % k] for i in range(len(b))):
                word = b[:k]
                break
        rots = [tuple(word[i:] + word[:i]) for i in range(len(word))]
        return min(rots)

    def __str__(self) -> str:
        return " ".join(f"{L}^{s}" for L, s in self.pattern)

    @property
    def is_l1(self) -> bool:
        """True for a single-block pattern ``L^1``."""
        p = self.pattern
        return len(p) == 1 and p[0][1] == 1 and p[0][0] >= 1


def _maxima_from_samples(t, x):
    t, x = np.asarray(t, float), np.asarray(x, float)
    i = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    # a plateau counts once
    i = i[np.concatenate([[True], np.diff(i) > 1])] if i.size else i
    return t[i], x[i]


def local_maxima(traj: Union[Trajectory, Tuple[Sequence, Sequence]], per_step: int = 16):
    """Times and values of the local maxima of x1.

    For a :class:`Trajectory` the dense output is sampled ``per_step``
    times per step and each discrete maximum is refined by a bounded
    scalar search; a ``(t, x1)`` pair of arrays is used as given.
    """
    if not isinstance(traj, Trajectory):
        return _maxima_from_samples(*traj)
    t = traj.t
    if len(t) < 2:
        return np.empty(0), np.empty(0)
    frac = np.linspace(0.0, 1.0, per_step, endpoint=False)
    ts = (t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel()
    ts = np.append(ts, t[-1])
    if traj.direction < 0:
        ts = ts[::-1]  # ascending
    xs = traj(ts)[:, 0]
    tm, _ = _maxima_from_samples(ts, xs)
    out_t, out_x = [], []
    for tc in tm:
        k = np.searchsorted(ts, tc)
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        res = minimize_scalar(lambda s: -traj(s)[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        out_t.append(float(res.x))
        out_x.append(float(-res.fun))
    order = slice(None) if traj.direction > 0 else slice(None, None, -1)  # along the integration
    return np.array(out_t)[order], np.array(out_x)[order]


def mmo_signature(traj, large_threshold: float = 0.5,
                  small_band: Tuple[float, float] = (0.01, 0.3)) -> MmoSignature:
    """L^s signature of a trajectory (or ``(t, x1)`` samples).

    Maxima of x1 with ``x1 >= large_threshold`` are large, those inside
    ``small_band`` small; others are ignored.  Consecutive runs are grouped
    into blocks of L large followed by s small maxima and the first and last
    block, possibly incomplete, are dropped.  A sequence without small
    maxima gives the single block ``(1, 0)`` (relaxation oscillation), one
    without large maxima the block ``(0, 1)``.

    Raises
    ------
    NoOscillations
        If no local maximum is found.
    """
    _, xm = local_maxima(traj)
    if xm.size == 0:
        raise NoOscillations("x1 has no local maximum")
    lo, hi = small_band
    seq = ["L" if x >= large_threshold else "S" if lo <= x <= hi else "" for x in xm]
    seq = [c for c in seq if c]
    band = (float(lo), float(hi))
    if not seq:
        raise NoOscillations("no maximum falls in the large or small class")
    if "S" not in seq:
        return MmoSignature(((1, 0),), float(large_threshold), band)
    if "L" not in seq:
        return MmoSignature(((0, 1),), float(large_threshold), band)
    blocks = []
    i = 0
    while i < len(seq):
        nl = 0
        while i < len(seq) and seq[i] == "L":
            nl += 1
            i += 1
        ns = 0
        while i < len(seq) and seq[i] == "S":
            ns += 1
            i += 1
        blocks.append((nl, ns))
    blocks = blocks[1:-1]
    return MmoSignature(tuple(blocks), float(large_threshold), band)


@dataclass(frozen=True)
class MmoScanEntry:
    p: float
    signature: Optional[MmoSignature]
    outcome: str
    error: str = ""

    @property
    def label(self) -> str:
        return str(self.signature) if self.signature is not None else ""


class EscapedOrbit(FHNError):
    """The orbit left the escape ball before the signature could be taken."""


MMO_CONFIG = IntegratorConfig(max_time=250.0, escape_radius=10.0)


def mmo_orbit(params: Params, config: Optional[IntegratorConfig] = None, transient: float = 50.0,
              record_time: float = 200.0, direction: str = "forward") -> Trajectory:
    """Trajectory used for the signature after discarding ``transient`` time units.

    Forward: the branch of W^u(q) that starts with increasing x1.
    Backward (diagnostic): a seed in W^s(q) integrated backward.
    """
    config = config or MMO_CONFIG
    if direction == "forward":
        start = equilibrium(params) + 1e-6 * unstable_direction(params)
    elif direction == "backward":
        try:
            q, basis = stable_plane(params)
            start = q + 1e-3 * basis[:, 0]
        except EmptyTrace:  # q repels in all directions
            start = equilibrium(params) + np.array([1e-3, 0.0, 0.0])
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    first = integrate("full", params, start, direction, config, t_span=transient)
    if first.termination is Termination.ESCAPED:
        raise EscapedOrbit("orbit escaped during the transient")
    second = integrate("full", params, first.y[-1], direction, config, t_span=record_time)
    if second.termination is Termination.ESCAPED:
        raise EscapedOrbit("orbit escaped after the transient")
    return second


def mmo_scan(params_base: Params, p_range=(0.0, 0.2), n: int = 41,
             config: Optional[IntegratorConfig] = None, transient: float = 50.0,
             record_time: float = 200.0, large_threshold: float = 0.5,
             small_band=(0.01, 0.3), direction: str = "forward",
             threads: int = 1) -> List[MmoScanEntry]:
    """Signatures over ``n`` equally spaced p; errors are recorded per p."""

    def one(p):
        params = params_base.replace(p=float(p))
        try:
            orbit = mmo_orbit(params, config, transient, record_time, direction)
        except EscapedOrbit as exc:
            return MmoScanEntry(float(p), None, "Escaped", str(exc))
        except FHNError as exc:
            return MmoScanEntry(float(p), None, "Error", f"{type(exc).__name__}: {exc}")
        try:
            sig = mmo_signature(orbit, large_threshold, small_band)
        except NoOscillations as exc:
            return MmoScanEntry(float(p), None, "Steady", str(exc))
        if not sig.blocks:
            return MmoScanEntry(float(p), None, "Irregular", "too few complete blocks")
        kind = "Relaxation" if sig.pattern == ((1, 0),) else (
            "SmallAmplitude" if sig.pattern == ((0, 1),) else "MMO")
        return MmoScanEntry(float(p), sig, kind)

    entries = pmap(one, np.linspace(p_range[0], p_range[1], n), threads)
    return sorted(entries, key=lambda e: e.p)


def mmo_scan_to_csv(entries: Sequence[MmoScanEntry], path, header: str = "") -> None:
    with open(path, "w") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        fh.write("p,signature,class\n")
        for e in entries:
            fh.write(f"{e.p:.16g},{e.label},{e.outcome}\n")


def mmo_scan_to_json(entries: Sequence[MmoScanEntry], large_threshold: float = 0.5,
                     small_band=(0.01, 0.3), meta: Optional[dict] = None) -> str:
    out = {
        "meta": meta or {},
        "large_threshold": large_threshold,
        "small_band": list(small_band),
        "entries": [
            {"p": e.p, "signature": e.label, "class": e.outcome, "error": e.error,
             "blocks": [list(b) for b in e.signature.blocks] if e.signature else []}
            for e in entries
        ],
    }
    return json.dumps(out, indent=2)
