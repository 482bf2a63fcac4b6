"""One pass/fail test per acceptance criterion; tolerances are fixed here."""

import math

import numpy as np
import pytest

from fhn_homoclinic.canard_mmo import canard_boundary_point, mmo_scan
from fhn_homoclinic.core_model import (
    Params,
    cubic_f,
    degree_one_coefficient,
    eigen_analysis,
    fold_points,
    shilnikov_condition,
    singular_hopf_limits,
)
from fhn_homoclinic.integrator import IntegratorConfig, ModelLinearParams, integrate
from fhn_homoclinic.manifold_scan import (
    find_limit_cycle_backward,
    hopf_point,
    splitting_point,
    stable_plane,
    tangency_hopf_distance,
    tangency_point,
    turn_regime,
)
from fhn_homoclinic.shilnikov_model import (
    Lost,
    ShilnikovModelParams,
    f21,
    find_periodic_points,
    homoclinic_parameters,
    recurrence_check,
    return_map,
    wu_probe,
)
from fhn_homoclinic.slow_manifold import compute_saddle_slow_manifold


# 1. tangency-to-Hopf distance --------------------------------------------------------------------------------


def test_c1_turn_to_hopf_distance_eps_1e_2():
    r = tangency_hopf_distance(Params(p=0.05, s=1.37), 1e-2)
    assert 0.90 <= r.ratio <= 1.25


def test_c1_turn_to_hopf_distance_eps_1e_3():
    r = tangency_hopf_distance(Params(p=0.05, s=1.5), 1e-3)
    assert 0.85 <= r.ratio <= 1.15


# 2. analytic fixtures ----------------------------------------------------------------------


def _bisect(f, a, b):
    for _ in range(200):
        m = 0.5 * (a + b)
        if f(a) * f(m) <= 0:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


def test_c2_analytic_fixtures():
    df = lambda x: -3 * x * x + 2 * 1.1 * x - 0.1
    oracle = (_bisect(df, 0.0, 0.3), _bisect(df, 0.3, 1.0))
    folds = fold_points(0.1)
    hopf = singular_hopf_limits(0.1)
    for x, f, h in zip(oracle, folds, hopf):
        assert abs(f - x) <= 1e-9
        assert abs(h - (x - cubic_f(x, 0.1))) <= 1e-9
    assert folds[0] == pytest.approx(0.0486869, abs=1e-7) and folds[1] == pytest.approx(0.6846464, abs=1e-7)
    assert hopf[0] == pytest.approx(0.0510635, abs=1e-7) and hopf[1] == pytest.approx(0.558416, abs=2e-6)


# 3. integrator -----------------------------------------------------------------------------


def test_c3_integrator_accuracy_and_reversal():
    m = ModelLinearParams(beta=0.1, alpha_rot=1.0, gamma=1.0)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    tr = integrate("model-linear", m, [1.0, 0.0, 0.0], "forward", cfg, t_span=10.0)
    exact = np.column_stack([np.exp(-0.1 * tr.t) * np.cos(tr.t), np.exp(-0.1 * tr.t) * np.sin(tr.t), tr.t])
    assert np.max(np.abs(tr.y[:, :3] - exact)) <= 1e-8

    prm = Params(p=0.05, s=1.37, eps=0.01)
    q, basis = stable_plane(prm)
    x0 = q + 1e-3 * basis[:, 0]
    fwd = integrate("full", prm, x0, "forward", cfg, t_span=0.2)
    back = integrate("full", prm, fwd.y_final, "backward", cfg, t_span=0.2)
    assert np.max(np.abs(back.y_final - x0)) <= 1e-6


# 4. slow manifold --------------------------------------------------------------------------


def test_c4_slow_manifold_scaling():
    segs = [compute_saddle_slow_manifold(Params(p=0.05, s=1.37, eps=e), "left", (0.06, 0.12))
            for e in (1e-2, 1e-3)]
    ratio = segs[0].distance_to_critical().max() / segs[1].distance_to_critical().max()
    assert 5 <= ratio <= 20
    assert all(seg.residual <= 1e-9 for seg in segs)


# 5. turn flip and splitting curve ----------------------------------------------------------


def test_c5_turn_flip_and_splitting():
    base = Params(p=0.05, s=1.37, eps=0.01)
    grid = np.arange(0.02, 0.10 + 1e-12, 0.005)
    signs = [turn_regime(base.replace(p=float(p)))[0] for p in grid]
    assert sum(a != b for a, b in zip(signs, signs[1:])) == 1

    p_split, _ = splitting_point(Params(p=0.05, s=1.3254, eps=0.01), "p", (0.03, 0.07), 1e-8)
    assert abs(p_split - 0.05) <= 0.01


# 6. Shilnikov condition and Hopf scaling ---------------------------------------------------


def test_c6_shilnikov_and_hopf_scaling():
    eig = eigen_analysis(Params(p=0.05, s=1.3254, eps=0.01))
    assert shilnikov_condition(eig)
    assert abs(eig.real_eig) > abs(eig.complex_pair[0])

    coeff, im = [], []
    for eps in (1e-2, 1e-3):
        base = Params(p=0.05, s=1.3254, eps=eps)
        p_h, _ = hopf_point(base)
        prm = base.replace(p=p_h)
        coeff.append(degree_one_coefficient(prm))
        im.append(abs(eigen_analysis(prm, "fast").complex_pair[1]) / math.sqrt(eps))
    assert 5 <= coeff[0] / coeff[1] <= 20
    assert 0.5 <= im[0] / im[1] <= 2.0


# 7. geometric model ------------------------------------------------------------------------


def test_c7_geometric_model():
    m = ShilnikovModelParams(alpha_rot=1.0, beta=0.1, gamma=1.0, rho=10.0, sigma=0.05,
                             lambda3=0.0, lambda2=0.04)
    lam = homoclinic_parameters(m)
    for l1, sign in zip(lam, (1, -1)):
        assert abs(l1 - sign * math.sqrt(m.lambda2) / m.rho) <= 1e-15
        assert abs(wu_probe(m.replace(lambda1=l1)).w) <= 1e-15

    rng = np.random.default_rng(7)
    for _ in range(20):
        mm = ShilnikovModelParams(alpha_rot=rng.uniform(0.5, 2), beta=rng.uniform(0.01, 0.5),
                                  gamma=rng.uniform(0.5, 2), rho=rng.uniform(2, 50),
                                  lambda1=rng.uniform(-0.1, 0.1), lambda2=rng.uniform(-0.3, 0.1),
                                  lambda3=rng.uniform(-0.1, 0.1), sigma=rng.uniform(0, 0.2))
        us = np.linspace(mm.lambda1, mm.lambda1 + 1 / mm.rho, 100)
        vs = np.linspace(-1, 1, 100)
        brute = any(f21((u, v), mm).w > 0 for u in us for v in vs)
        assert recurrence_check(mm) == brute

    ref = m.replace(lambda2=0.02)
    ref = ref.replace(lambda1=homoclinic_parameters(ref)[0] + 1e-4)
    pts = [pp for pp in find_periodic_points(ref) if pp.period == 1]
    assert pts
    for pp in pts:
        img = return_map(pp.point, ref)
        assert not isinstance(img, Lost)
        assert np.max(np.abs(img.coords - pp.point.coords)) <= 1e-10


# 8. backward limit cycle -------------------------------------------------------------------


def test_c8_completely_unstable_cycle():
    orbit = find_limit_cycle_backward(Params(p=0.06, s=1.38, eps=0.01))
    assert orbit.residual <= 1e-6
    # the trivial multiplier along the flow is already removed
    assert len(orbit.multipliers) == 2 and all(abs(z) > 1 for z in orbit.multipliers)
    assert orbit.stability == "CompletelyUnstable"


# 9. canard ordering ------------------------------------------------------------------------


@pytest.mark.parametrize("s", [1.2, 1.3, 1.4])
def test_c9_canard_before_tangency(s):
    base = Params(p=0.05, s=s, eps=0.01)
    p_canard, _ = canard_boundary_point(base)
    p_tan, _ = tangency_point(base)
    assert p_canard < p_tan


# 10. MMO catalogue -------------------------------------------------------------------------


def test_c10_mmo_catalogue():
    base = Params(p=0.0, s=1.0, eps=0.01)
    scan = mmo_scan(base, (0.0, 0.2), 41)
    labels = {e.label for e in scan if e.signature is not None}
    l1 = {e.signature.pattern for e in scan if e.signature is not None and e.signature.is_l1}
    assert scan == mmo_scan(base, (0.0, 0.2), 41)
    assert scan == mmo_scan(base, (0.0, 0.2), 41, threads=2)
    assert "1^1" in labels and "4^1" in labels
    assert len(l1) >= 3
