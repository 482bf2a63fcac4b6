import math

import numpy as np
import pytest

from fhn_homoclinic.core_model import Params, critical_x1, cubic_f, fold_points, layer_jacobian
from fhn_homoclinic.errors import FoldTooClose, NoIntersection, OutOfRange
from fhn_homoclinic.integrator import IntegratorConfig, Termination
from fhn_homoclinic.manifold_scan import splitting_point
from fhn_homoclinic.slow_manifold import (
    ManifoldMesh,
    compute_saddle_slow_manifold,
    curve_crossing_angle,
    layer_eigenframe,
    manifold_mesh,
    middle_branch_backward,
    middle_branch_seeds,
    section_point,
    segment_to_csv,
    segment_to_json,
    transversality_check,
)


@pytest.fixture(scope="module")
def seg_left():
    return compute_saddle_slow_manifold(Params(p=0.05, s=1.37, eps=0.01), "left", (0.06, 0.12))


def test_bvp_close_to_critical_manifold(seg_left):
    d = seg_left.distance_to_critical()
    assert d.max() <= 0.05
    assert seg_left.residual <= 1e-9
    ys = seg_left.ys
    assert np.all(np.diff(ys) < 0) or np.all(np.diff(ys) > 0)
    assert min(ys) == pytest.approx(0.06, abs=1e-9) and max(ys) == pytest.approx(0.12, abs=1e-9)


def test_bvp_scaling_with_eps(seg_left):
    small = compute_saddle_slow_manifold(Params(p=0.05, s=1.37, eps=1e-3), "left", (0.06, 0.12))
    ratio = seg_left.distance_to_critical().max() / small.distance_to_critical().max()
    assert 5 <= ratio <= 20
    for seg, eps in ((seg_left, 1e-2), (small, 1e-3)):
        assert 0.01 <= seg.distance_to_critical().max() / eps <= 100


@pytest.mark.slow
def test_bvp_singular_limit():
    seg = compute_saddle_slow_manifold(Params(p=0.05, s=1.37, eps=1e-6), "left", (0.06, 0.12))
    assert seg.distance_to_critical().max() <= 1e-4
    assert seg.residual <= 1e-9


def test_bvp_right_branch():
    seg = compute_saddle_slow_manifold(Params(p=0.05, s=1.37, eps=0.01), "right", (0.1, 0.16))
    assert seg.residual <= 1e-9
    assert seg.distance_to_critical().max() <= 0.05
    assert all(f.is_saddle and f.lam_s < 0 < f.lam_u for f in seg.frames)


def test_bvp_fold_margin():
    y_fold = cubic_f(fold_points(0.1)[0], 0.1) + 0.05
    with pytest.raises(FoldTooClose):
        compute_saddle_slow_manifold(Params(p=0.05), "left", (y_fold + 0.005, 0.12))


def test_section_point_and_frame(seg_left):
    k = 17
    node = seg_left.samples[k]
    pt, frame = section_point(seg_left, float(node[2]))
    np.testing.assert_array_equal(pt, node)
    assert frame is seg_left.frames[k]
    pt, frame = section_point(seg_left, 0.09)
    assert pt[2] == pytest.approx(0.09, abs=1e-12)
    assert frame.lam_s < 0 < frame.lam_u
    assert max(frame.residuals()) <= 1e-10
    with pytest.raises(OutOfRange):
        section_point(seg_left, 0.2)


def test_layer_frame_against_numpy():
    prm = Params(p=0.05, s=1.37)
    x1 = critical_x1(0.09, prm)
    frame = layer_eigenframe([x1, 0.0, 0.09], prm)
    ref = np.sort(np.linalg.eigvals(layer_jacobian(x1, prm)).real)
    np.testing.assert_allclose([frame.lam_s, frame.lam_u], ref, rtol=1e-12)
    assert abs(np.linalg.norm(frame.e_s) - 1) < 1e-15 and abs(np.linalg.norm(frame.e_u) - 1) < 1e-15


def test_middle_branch_unstable_foci():
    prm = Params(p=0.05, s=1.37)
    for x1 in middle_branch_seeds():
        frame = layer_eigenframe([x1, 0.0, cubic_f(x1) + prm.p], prm)
        assert not frame.is_saddle
        assert all(e.real > 0 for e in frame.eigenvalues)


def test_middle_branch_seeds():
    seeds = middle_branch_seeds()
    lo, hi = fold_points(0.1)
    assert len(seeds) == 11
    assert seeds[0] == pytest.approx(lo + 0.05 * (hi - lo))
    assert np.all(np.diff(seeds) > 0)


def _dist_to_middle(traj, params):
    lo, hi = fold_points(params.alpha_cubic)
    ylo, yhi = cubic_f(lo) + params.p, cubic_f(hi) + params.p
    band = (traj.y[:, 2] > ylo + 0.02) & (traj.y[:, 2] < yhi - 0.02)
    x = traj.y[band]
    return np.array([math.hypot(a - critical_x1(y, params, "middle"), b) for a, b, y in x])


def test_middle_branch_backward_attracts():
    prm = Params(p=0.05, s=1.2, eps=0.01)
    lo, hi = fold_points(0.1)
    tr = middle_branch_backward(prm, 0.5 * (lo + hi))
    assert tr.termination is not Termination.SECTION_HIT
    d = _dist_to_middle(tr, prm)
    assert d.size and d.min() <= 0.05


def test_middle_branch_seeds_converge():
    # the backward contraction rate is s / (2 delta eps); at eps = 1e-2 the branch is too short
    # for a 1e-6 gap, at eps = 1e-3 it is reached well above the fold
    prm = Params(p=0.05, s=1.2, eps=1e-3)
    cfg = IntegratorConfig(max_time=1.0)
    a = middle_branch_backward(prm, 0.35, cfg)
    b = middle_branch_backward(prm, 0.40, cfg)
    # compare at equal heights well below both seeds
    ys = np.linspace(0.07, 0.09, 5)

    def at_height(tr, y):
        g = tr.y[:, 2] - y
        i = np.nonzero(g[:-1] * g[1:] <= 0)[0][0]
        from scipy.optimize import brentq

        t = brentq(lambda t: tr(t)[2] - y, tr.t[i + 1], tr.t[i], xtol=1e-15)
        return tr(t)

    gap = max(np.linalg.norm(at_height(a, y)[:2] - at_height(b, y)[:2]) for y in ys)
    assert gap < 1e-6


def test_middle_branch_seed_validation():
    with pytest.raises(ValueError):
        middle_branch_backward(Params(), 0.9)


def test_mesh_zero_offset_tracks_manifold(seg_left):
    mesh = manifold_mesh(seg_left, "stable", 0.0, 3, t_max=0.05)
    for base, tr in zip(mesh.bases, mesh.trajectories):
        ys = tr.y[:, 2]
        assert np.max(np.abs(tr.y[0] - base)) == 0.0
        d = [math.hypot(x1 - critical_x1(y, seg_left.params), x2) for x1, x2, y in tr.y]
        assert max(d) <= 0.05
        assert ys.min() > 0.05


def test_mesh_seed_offsets(seg_left):
    mesh = manifold_mesh(seg_left, "unstable", 1e-4, 5, t_max=0.05)
    assert isinstance(mesh, ManifoldMesh)
    for base, seed in zip(mesh.bases, mesh.seeds):
        assert np.linalg.norm(seed - base) == pytest.approx(1e-4, rel=1e-12)
    with pytest.raises(ValueError):
        manifold_mesh(seg_left, "stable", 0.1, 3)


def test_unstable_mesh_leaves_fast(seg_left):
    mesh = manifold_mesh(seg_left, "unstable", 1e-4, 6, t_max=1.0)
    for tr in mesh.trajectories:
        d = [math.hypot(x1 - critical_x1(max(y, 0.05), seg_left.params), x2) for x1, x2, y in tr.y]
        # exp(lam_u t / eps) growth: O(1) departure within a small fraction of a slow-time unit
        far = np.nonzero(np.array(d) > 0.1)[0]
        assert far.size and tr.t[far[0]] < 0.2


def test_stable_mesh_two_components():
    # backward from either side of C_{l,eps}, the seeds separate to opposite sides of it
    prm = Params(p=0.05, s=1.37, eps=0.01)
    seg = compute_saddle_slow_manifold(prm, "left", (0.06, 0.2))
    mesh = manifold_mesh(seg, "stable", 1e-4, 6, t_max=1.0)
    lo, hi = min(seg.ys), max(seg.ys)
    for k, tr in enumerate(mesh.trajectories):
        side = 0
        for x in tr.y:
            if not lo < x[2] < hi:
                break
            dx = x[0] - section_point(seg, float(x[2]))[0][0]
            if abs(dx) > 5e-4:
                side = int(np.sign(dx))
                break
        assert side == mesh.signs[k]


def test_crossing_angle_synthetic():
    a = np.column_stack([np.linspace(-1, 1, 11), np.zeros(11)])
    b = np.column_stack([np.zeros(11), np.linspace(-1, 1, 11)])
    assert curve_crossing_angle(a, b) == pytest.approx(math.pi / 2, abs=1e-6)
    with pytest.raises(NoIntersection):
        curve_crossing_angle(a, a + [0.0, 1.0])


def test_identical_meshes_not_transversal(seg_left):
    mesh = manifold_mesh(seg_left, "stable", 1e-4, 4, t_max=1.0)
    try:
        _, ok = transversality_check(mesh, mesh, 0.15)
    except NoIntersection:
        return
    assert not ok


def test_transversal_on_splitting_curve():
    base = Params(p=0.05, s=1.4, eps=0.01)
    p, _ = splitting_point(base, "p", (0.06, 0.07), width=1e-10)
    prm = base.replace(p=p)
    angles = []
    for yc in (0.1275, 0.1375, 0.1475):
        left = compute_saddle_slow_manifold(prm, "left", (yc - 0.03, yc + 0.03))
        right = compute_saddle_slow_manifold(prm, "right", (yc - 0.03, yc + 0.03))
        ms = manifold_mesh(left, "stable", 1e-4, 20, t_max=2.0)
        mu = manifold_mesh(right, "unstable", 1e-4, 20, t_max=2.0)
        try:
            angles.append(transversality_check(ms, mu, yc)[0])
        except NoIntersection:
            pass
    assert angles and min(angles) > 1e-2


def test_segment_export(seg_left, tmp_path):
    import json

    doc = json.loads(segment_to_json(seg_left))
    assert doc["branch"] == "left"
    path = tmp_path / "seg.csv"
    segment_to_csv(seg_left, path, header="p=0.05")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len([ln for ln in lines if not ln.startswith("#")]) == len(seg_left.samples) + 1
