"""Adaptive DOP853 initial-value solver with dense output and section events."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from .core_model import Params
from .errors import HorizonReached, StepSizeUnderflow


class Termination(enum.Enum):
    HORIZON_REACHED = "HorizonReached"
    SECTION_HIT = "SectionHit"
    ESCAPED = "Escaped"


_STATUS = {
    K.HORIZON: Termination.HORIZON_REACHED,
    K.SECTION: Termination.SECTION_HIT,
    K.ESCAPED: Termination.ESCAPED,
    K.MAX_STEPS: Termination.HORIZON_REACHED,
}

_FIELDS = {"full": K.FHN_SLOW, "fast": K.FHN_FAST, "layer": K.LAYER, "model-linear": K.LINEAR_MODEL}


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    escape_radius: float = 10.0
    max_time: float = 1e4
    max_steps: int = 20_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "escape_radius", "max_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def replace(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModelLinearParams:
    """Coefficients of the linear saddle-focus field u' = -b u - a v, v' = a u - b v, w' = g."""

    beta: float
    alpha_rot: float
    gamma: float

    def as_array(self):
        return np.array([self.beta, self.alpha_rot, self.gamma])


@dataclass(frozen=True)
class SectionEvent:
    time: float
    state: np.ndarray
    direction: int


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted DOP853 nodes plus per-step interpolation coefficients.

    Calling the trajectory with a time (or array of times) evaluates the
    dense output.  Node times are strictly monotone in the integration
    direction.
    """

    t: np.ndarray
    y: np.ndarray
    coeffs: np.ndarray = field(repr=False)
    termination: Termination
    event: Optional[SectionEvent] = None

    @property
    def direction(self) -> int:
        return 1 if len(self.t) < 2 or self.t[-1] >= self.t[0] else -1

    @property
    def t_final(self) -> float:
        if self.event is not None:
            return self.event.time
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        if self.event is not None:
            return self.event.state
        return self.y[-1]

    def _locate(self, tq):
        if self.direction > 0:
            idx = np.searchsorted(self.t, tq, side="right") - 1
        else:
            idx = np.searchsorted(-self.t, -tq, side="right") - 1
        return np.clip(idx, 0, len(self.t) - 2)

    def __call__(self, tq):
        tq = np.asarray(tq, dtype=float)
        scalar = tq.ndim == 0
        tq = np.atleast_1d(tq)
        lo, hi = min(self.t[0], self.t[-1]), max(self.t[0], self.t[-1])
        if np.any(tq < lo - 1e-12 * max(1, abs(lo))) or np.any(tq > hi + 1e-12 * max(1, abs(hi))):
            raise ValueError("requested time outside the trajectory span")
        if len(self.t) == 1:
            out = np.repeat(self.y[:1], len(tq), axis=0)
            return out[0] if scalar else out
        idx = self._locate(tq)
        t0 = self.t[idx]
        h = self.t[idx + 1] - t0
        x = ((tq - t0) / h)[:, None]
        F = self.coeffs[idx]
        out = np.zeros((len(tq), self.y.shape[1]))
        npoly = F.shape[1]
        for i, k in enumerate(range(npoly - 1, -1, -1)):
            out += F[:, k, :]
            out *= x if i % 2 == 0 else (1.0 - x)
        out += self.y[idx]
        exact = x[:, 0] == 0.0
        out[exact] = self.y[idx[exact]]
        return out[0] if scalar else out

    def to_csv(self, path, header: str = "") -> None:
        """Write nodes as CSV with columns t, x1, x2, y at 16 significant digits."""
        with open(path, "w") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("t,x1,x2,y\n")
            for ti, yi in zip(self.t, self.y):
                fh.write(",".join(f"{v:.16g}" for v in (ti, *yi[:3])) + "\n")


def _param_array(field_kind: int, params) -> np.ndarray:
    if field_kind == K.LINEAR_MODEL:
        if isinstance(params, ModelLinearParams):
            return params.as_array()
        # a ShilnikovModelParams-like object
        return np.array([params.beta, params.alpha_rot, params.gamma], dtype=float)
    if not isinstance(params, Params):
        raise TypeError("FitzHugh-Nagumo fields need Params")
    if field_kind in (K.FHN_SLOW, K.FHN_SLOW_VARIATIONAL) and params.eps == 0:
        raise ZeroDivisionError("slow time scale is undefined for eps = 0")
    return params.as_array()


def _run(field_kind, params, start, direction, config: IntegratorConfig, *, t_span=None,
         event=None, record=True):
    start = np.asarray(start, dtype=float)
    if not np.all(np.isfinite(start)):
        raise ValueError("start state must be finite")
    sign = 1.0 if direction in ("forward", 1, +1) else -1.0
    if direction not in ("forward", "backward", 1, -1):
        raise ValueError(f"unknown direction {direction!r}")
    horizon = config.max_time if t_span is None else float(t_span)
    ev_idx, ev_val, ev_dir, skip = (-1, 0.0, 0, False) if event is None else event
    status, ts, ys, Fs, t_ev, y_ev = K.integrate_kernel(
        field_kind, _param_array(field_kind, params), 0.0, start, sign * horizon,
        config.rel_tol, config.abs_tol, config.max_step, config.escape_radius,
        ev_idx, ev_val, ev_dir, skip, record, config.max_steps,
    )
    if status == K.UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow at t={ts[-1]:.6g}")
    ev = None
    if status == K.SECTION:
        # the step end lies past the crossing, so its side gives the crossing sign
        ev = SectionEvent(float(t_ev), y_ev.copy(), 1 if ys[-1][ev_idx] >= ev_val else -1)
    return Trajectory(ts.copy(), ys.copy(), Fs.copy(), _STATUS[status], ev)


def integrate(field_name: str, params: Union[Params, ModelLinearParams], start, direction="forward",
              config: IntegratorConfig = IntegratorConfig(), t_span: Optional[float] = None) -> Trajectory:
    """Integrate one of the supported vector fields.

    ``field_name`` is ``"full"`` (slow time), ``"fast"`` (fast time),
    ``"layer"`` (fast subsystem) or ``"model-linear"`` (linear saddle-focus
    field).  Integration stops after ``t_span`` (default ``config.max_time``)
    or as soon as the state norm exceeds ``config.escape_radius``.
    """
    try:
        kind = _FIELDS[field_name]
    except KeyError:
        raise ValueError(f"unknown field {field_name!r}") from None
    return _run(kind, params, start, direction, config, t_span=t_span)


def integrate_to_section(params, start, direction, y_section: float,
                         config: IntegratorConfig = IntegratorConfig(), *,
                         field_name: str = "full", component: int = 2,
                         crossing: int = 0, skip_start: bool = False,
                         record: bool = True) -> Trajectory:
    """Integrate until the first crossing of ``state[component] == y_section``.

    The returned trajectory carries the localized :class:`SectionEvent`, or
    has termination ``ESCAPED`` when the escape radius was exceeded first.
    ``crossing`` restricts the sign of the crossing along the integration
    (+1: component increasing, -1: decreasing, 0: either).

    Raises
    ------
    HorizonReached
        If neither a crossing nor an escape occurred before ``max_time``.
    """
    kind = _FIELDS[field_name]
    traj = _run(kind, params, start, direction, config,
                event=(component, float(y_section), int(crossing), bool(skip_start)), record=record)
    if traj.termination is Termination.HORIZON_REACHED:
        raise HorizonReached("no section crossing before the time horizon")
    return traj


def integrate_variational(params: Params, start, t_span: float, direction="forward",
                          config: IntegratorConfig = IntegratorConfig(), event=None):
    """Integrate the full field with its 3x3 fundamental matrix.

    Returns ``(trajectory, final_state, final_matrix)``.  ``event`` has the
    same meaning as in :func:`integrate_to_section` given as a tuple
    ``(component, value, crossing, skip_start)``.
    """
    start = np.concatenate([np.asarray(start, dtype=float), np.eye(3).ravel()])
    traj = _run(K.FHN_SLOW_VARIATIONAL, params, start, direction, config, t_span=t_span,
                event=event, record=False)
    final = traj.y_final
    return traj, final[:3].copy(), final[3:].reshape(3, 3).copy()
