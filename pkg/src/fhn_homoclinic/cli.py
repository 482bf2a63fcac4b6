"""Command-line interface: one subcommand per analysis.

Every run prints the resolved configuration as a JSON header line, then
the result.  Output files start with a comment block (CSV) or a ``meta``
entry (JSON) holding the same configuration.  Parameters can also come from
a ``key=value`` file given with ``--config``; flags override the file.
``FHN_OUTPUT_DIR``, if set, is prepended to relative output paths.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import canard_mmo, core_model, manifold_scan, shilnikov_model, slow_manifold
from .core_model import Params
from .errors import FHNError
from .integrator import IntegratorConfig, integrate

OUTPUT_DIR_ENV = "FHN_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(x: str) -> float:
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{x} is not positive")
    return v


def _nonneg(x: str) -> float:
    v = float(x)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{x} is negative")
    return v


def _count(x: str) -> int:
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{x} is not a positive integer")
    return v


def _vector(x: str) -> List[float]:
    try:
        vals = [float(t) for t in x.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{x!r} is not a comma-separated list of numbers") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return vals


def _num(v):
    """Round floats to 16 significant digits for output."""
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.16g}")
    if isinstance(v, complex):
        return [_num(v.real), _num(v.imag)]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    return v


# parser ----------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    c = _Parser(add_help=False)
    g = c.add_argument_group("system parameters")
    g.add_argument("--p", type=float, default=0.05)
    g.add_argument("--s", type=_positive, default=1.37)
    g.add_argument("--eps", type=_nonneg, default=0.01)
    g.add_argument("--delta", type=_positive, default=5.0)
    g.add_argument("--alpha-cubic", type=float, default=0.1)
    t = c.add_argument_group("integrator")
    t.add_argument("--rel-tol", type=_positive, default=1e-10)
    t.add_argument("--abs-tol", type=_positive, default=1e-12)
    t.add_argument("--max-step", type=_positive, default=0.1)
    t.add_argument("--escape-radius", type=_positive, default=10.0)
    t.add_argument("--max-time", type=_positive, default=None)
    o = c.add_argument_group("output")
    o.add_argument("--output", "-o", default=None, help="output file")
    o.add_argument("--format", choices=("csv", "json"), default="json")
    o.add_argument("--threads", type=_count, default=1)
    o.add_argument("--config", default=None, help="key=value parameter file")
    return c


def _s_range(sp, lo, hi, n):
    sp.add_argument("--s-min", type=_positive, default=lo)
    sp.add_argument("--s-max", type=_positive, default=hi)
    sp.add_argument("--n", type=_count, default=n)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fhn-homoclinic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    common = _common()

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    sp = add("integrate", "integrate a vector field from a start state")
    sp.add_argument("--field", choices=("full", "fast", "layer"), default="full")
    sp.add_argument("--start", type=_vector, required=True, help="x1,x2,y")
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    sp.add_argument("--t-span", type=_positive, default=1.0)

    add("equilibrium", "equilibrium q")
    sp = add("eigen", "spectrum and frame at q")
    sp.add_argument("--scale", choices=("slow", "fast"), default="slow")

    sp = add("slow-manifold", "saddle-type slow manifold by multiple shooting")
    sp.add_argument("--branch", choices=("left", "right"), default="left")
    sp.add_argument("--y-min", type=float, default=0.06)
    sp.add_argument("--y-max", type=float, default=0.12)
    sp.add_argument("--nodes", type=_count, default=None)

    for name, help_ in (("ws-trace", "section trace of W^s(q)"),
                        ("turn", "turn point and signed offset of W^s(q)")):
        sp = add(name, help_)
        sp.add_argument("--y-section", type=float, default=0.09)
        sp.add_argument("--n-seeds", type=_count, default=400)
        sp.add_argument("--seed-radius", type=_positive, default=1e-3)

    for name, help_, lo, hi, n in (
        ("tangency-curve", "tangency of W^s(q) with E^u(C_l)", 1.3, 1.45, 4),
        ("distance-contour", "contour of the section distance to C_l", 1.3, 1.45, 4),
        ("splitting-curve", "splitting proxy of the homoclinic curve", 1.3, 1.45, 7),
        ("hopf-curve", "left Hopf curve", 1.2, 1.5, 7),
        ("canard-boundary", "onset of backward canards along C_m", 1.2, 1.4, 3),
    ):
        sp = add(name, help_)
        _s_range(sp, lo, hi, n)
        if name in ("tangency-curve", "distance-contour"):
            sp.add_argument("--y-section", type=float, default=None)
            sp.add_argument("--n-seeds", type=_count, default=400)
            sp.add_argument("--seed-radius", type=_positive, default=1e-3)
        if name == "distance-contour":
            sp.add_argument("--level", type=_positive, default=0.01)

    sp = add("table1", "distance of the tangency point from the Hopf curve")
    sp.add_argument("--n-seeds", type=_count, default=400)

    sp = add("limit-cycle", "backward limit cycle of a W^s(q) orbit")
    sp.add_argument("--theta", type=float, default=0.0)

    sp = add("shilnikov", "geometric return-map model")
    for flag, default, typ in (("--alpha-rot", 1.0, _positive), ("--beta", 0.1, _nonneg),
                               ("--gamma", 1.0, _positive), ("--lambda1", 0.0, float),
                               ("--lambda2", 0.02, float), ("--lambda3", 0.0, float),
                               ("--rho", 10.0, _positive), ("--sigma", 0.05, _nonneg)):
        sp.add_argument(flag, type=typ, default=default)
    sp.add_argument("--max-period", type=_count, default=1)
    sp.add_argument("--grid", type=_count, default=100)

    sp = add("mmo-scan", "mixed-mode signatures over p")
    sp.add_argument("--p-min", type=float, default=0.0)
    sp.add_argument("--p-max", type=float, default=0.2)
    sp.add_argument("--n", type=_count, default=41)
    sp.add_argument("--transient", type=_positive, default=50.0)
    sp.add_argument("--record-time", type=_positive, default=200.0)
    sp.add_argument("--large-threshold", type=float, default=0.5)
    sp.add_argument("--small-min", type=float, default=0.01)
    sp.add_argument("--small-max", type=float, default=0.3)
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    return parser


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (t.strip() for t in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def parse(argv: List[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = _read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        for k in values:
            if k not in actions or k in ("help", "config"):
                raise UsageError(f"unknown configuration key {k!r}")
        # config values become defaults, then the command line is parsed again
        defaults = {}
        for k, v in values.items():
            a = actions[k]
            try:
                defaults[k] = a.type(v) if a.type else v
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"bad value for {k!r}: {exc}") from None
            if a.choices is not None and defaults[k] not in a.choices:
                raise UsageError(f"bad value for {k!r}: {v}")
        sub.set_defaults(**defaults)
        for a in sub._actions:
            if a.dest in defaults:
                a.required = False
        args = parser.parse_args(argv)
    return args


# runs -------------------------------------------------------------------------


def _params(a) -> Params:
    return Params(p=a.p, s=a.s, delta=a.delta, alpha_cubic=a.alpha_cubic, eps=a.eps)


def _config(a, default_time: float) -> IntegratorConfig:
    return IntegratorConfig(rel_tol=a.rel_tol, abs_tol=a.abs_tol, max_step=a.max_step,
                            escape_radius=a.escape_radius,
                            max_time=a.max_time if a.max_time is not None else default_time)


def _resolved(a) -> dict:
    d = {k: v for k, v in sorted(vars(a).items()) if k not in ("output", "config", "threads")}
    return _num(d)


def _out_path(a) -> Optional[str]:
    if not a.output:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(a.output):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, a.output)
    return a.output


def _emit_json(a, header: dict, result: dict) -> None:
    doc = {"meta": header, **_num(result)}
    text = json.dumps(doc, indent=2)
    print(text)
    path = _out_path(a)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _header_lines(header: dict) -> str:
    return "config " + json.dumps(header, sort_keys=True)


def _curve_result(curve):
    return {"kind": curve.kind,
            "samples": [{"s": s, "p": p, "residual": r} for p, s, r in curve.samples],
            "skipped": [list(x) for x in curve.skipped], **curve.extra}


def _run(a) -> None:
    header = {"command": a.command, **_resolved(a)}
    print(json.dumps({"config": header}, sort_keys=True))
    params = _params(a)
    path = _out_path(a)
    cmd = a.command

    if cmd == "integrate":
        tr = integrate(a.field, params, a.start, a.direction, _config(a, a.t_span), t_span=a.t_span)
        if a.format == "csv" and path:
            tr.to_csv(path, header=_header_lines(header))
        _emit_json(a if a.format == "json" else _no_file(a), header,
                   {"termination": tr.termination.value, "t_final": tr.t_final,
                    "y_final": tr.y_final[:3], "n_nodes": len(tr.t)})
    elif cmd == "equilibrium":
        _emit_json(a, header, {"q": core_model.equilibrium(params)})
    elif cmd == "eigen":
        e = core_model.eigen_analysis(params, a.scale)
        _emit_json(a, header, {"real_eig": e.real_eig, "complex_pair": e.complex_pair,
                               "eigenvalues": list(e.eigenvalues), "frame": e.frame,
                               "shilnikov_condition": core_model.shilnikov_condition(e)})
    elif cmd == "slow-manifold":
        seg = slow_manifold.compute_saddle_slow_manifold(
            params, a.branch, (a.y_min, a.y_max), n_nodes=a.nodes, config=_config(a, 1e4))
        if a.format == "csv" and path:
            slow_manifold.segment_to_csv(seg, path, header=_header_lines(header))
        _emit_json(a if a.format == "json" else _no_file(a), header,
                   {"residual": seg.residual, "total_time": seg.total_time,
                    "iterations": seg.iterations, "n_samples": len(seg.samples),
                    "max_distance_to_critical": float(np.max(seg.distance_to_critical()))})
    elif cmd == "ws-trace":
        tr = manifold_scan.ws_trace(params, a.y_section, a.n_seeds, a.seed_radius,
                                    _config(a, 100.0), threads=a.threads)
        if a.format == "csv" and path:
            tr.to_csv(path, header=_header_lines(header))
        _emit_json(a if a.format == "json" else _no_file(a), header,
                   {"n_points": len(tr), "n_escaped": tr.n_escaped, "n_bounded": tr.n_bounded,
                    "closed": tr.closed,
                    "points": [[th, x1, x2] for th, (x1, x2) in zip(tr.params, tr.points)]})
    elif cmd == "turn":
        r = manifold_scan.turn_offset(params, a.y_section, a.n_seeds, a.seed_radius,
                                      _config(a, 100.0), threads=a.threads)
        _emit_json(a, header, {"delta": r.value, "theta": r.theta, "turn_point": r.point,
                               "p_l": r.p_l[:2], "side": "left" if r.value < 0 else "right"})
    elif cmd in ("tangency-curve", "distance-contour", "splitting-curve", "hopf-curve",
                 "canard-boundary"):
        rng = (a.s_min, a.s_max)
        if cmd == "tangency-curve":
            curve = manifold_scan.tangency_curve(params, rng, a.n, None, a.y_section, a.n_seeds,
                                                 a.seed_radius, _config(a, 100.0), a.threads)
        elif cmd == "distance-contour":
            curve = manifold_scan.distance_contour(params, rng, a.level, a.n, None, a.y_section,
                                                   a.n_seeds, a.seed_radius, _config(a, 100.0),
                                                   a.threads)
        elif cmd == "splitting-curve":
            curve = manifold_scan.splitting_curve(params, rng, a.n, config=_config(a, 30.0),
                                                  threads=a.threads)
        elif cmd == "hopf-curve":
            curve = manifold_scan.hopf_curve(params, rng, a.n, threads=a.threads)
        else:
            curve = canard_mmo.canard_boundary(params, rng, a.n, config=_config(a, 200.0),
                                               threads=a.threads)
        if a.format == "csv" and path:
            curve.to_csv(path, header=_header_lines(header))
        _emit_json(a if a.format == "json" else _no_file(a), header, _curve_result(curve))
    elif cmd == "table1":
        r = manifold_scan.tangency_hopf_distance(params, params.eps, n_seeds=a.n_seeds,
                                                 threads=a.threads)
        _emit_json(a, header, {"eps": r.eps, "D": r.distance, "D_over_eps": r.ratio,
                               "tangency_point": [r.tangency_p, r.tangency_s],
                               "hopf_point": [r.hopf_p, r.hopf_s], "y_section": r.y_section})
    elif cmd == "limit-cycle":
        o = manifold_scan.find_limit_cycle_backward(params, _config(a, 50.0), a.theta)
        _emit_json(a, header, {"period": o.period, "point": o.point, "amplitude": o.amplitude,
                               "stability": o.stability, "multipliers": list(o.multipliers),
                               "residual": o.residual})
    elif cmd == "shilnikov":
        m = shilnikov_model.ShilnikovModelParams(a.alpha_rot, a.beta, a.gamma, a.lambda1,
                                                 a.lambda2, a.lambda3, a.rho, a.sigma)
        doc = json.loads(shilnikov_model.analysis_json(m, a.max_period, a.grid))
        doc.pop("model")
        _emit_json(a, header, doc)
    elif cmd == "mmo-scan":
        band = (a.small_min, a.small_max)
        entries = canard_mmo.mmo_scan(params, (a.p_min, a.p_max), a.n,
                                      _config(a, a.transient + a.record_time), a.transient,
                                      a.record_time, a.large_threshold, band, a.direction,
                                      a.threads)
        if a.format == "csv" and path:
            canard_mmo.mmo_scan_to_csv(entries, path, header=_header_lines(header))
        doc = json.loads(canard_mmo.mmo_scan_to_json(entries, a.large_threshold, band))
        doc.pop("meta")
        _emit_json(a if a.format == "json" else _no_file(a), header, doc)
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {cmd}")


def _no_file(a):
    return argparse.Namespace(**{**vars(a), "output": None})


def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return 2
    try:
        _run(args)
    except (FHNError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
