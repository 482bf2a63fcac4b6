"""Backward canards along the middle branch and the unstable small cycle.

Orbits through the middle branch of the critical manifold escape in
backward time for small p and stay bounded for larger p.  The switch lies
just below the tangency value of p.  Inside the bounded regime a W^s(q)
orbit accumulates on a small periodic orbit that repels in forward time.

Run: python3 demos/04_canards_and_limit_cycle.py   (about 40 s)
"""

from fhn_homoclinic.canard_mmo import canard_boundary_point
from fhn_homoclinic.core_model import Params
from fhn_homoclinic.manifold_scan import find_limit_cycle_backward, tangency_point

for s in (1.2, 1.3, 1.4):
    base = Params(p=0.05, s=s, eps=0.01)
    p_c, width = canard_boundary_point(base)
    p_t, _ = tangency_point(base)
    print(f"s = {s}: canard onset p = {p_c:.7f} (bracket {width:.1e}), tangency p = {p_t:.7f}")

orbit = find_limit_cycle_backward(Params(p=0.06, s=1.38, eps=0.01))
print(f"\nsmall cycle at (p, s) = (0.06, 1.38): period {orbit.period:.5f}, amplitude {orbit.amplitude:.4f}")
print(f"Floquet multipliers {[f'{abs(m):.4g}' for m in orbit.multipliers]} -> {orbit.stability}")
