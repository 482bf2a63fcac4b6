"""How the trace of W^s(q) on a section turns around the slow manifold C_l.

At fixed speed s the turn of the trace sits on the far side of the line
p_l + span(e_u) for small p and on the near side for larger p.  The p where
the offset vanishes is the tangency of W^s(q) with E^u(C_l).

Run: python3 demos/01_turn_of_stable_manifold.py   (about 30 s)
"""

import numpy as np

from fhn_homoclinic.core_model import Params, eigen_analysis, equilibrium
from fhn_homoclinic.manifold_scan import (
    default_section_height,
    hopf_point,
    tangency_point,
    turn_regime,
    ws_trace,
)

base = Params(p=0.05, s=1.37, eps=0.01)
q = equilibrium(base)
eig = eigen_analysis(base)
print(f"q = {q}, real eigenvalue {eig.real_eig:.4f}, complex pair {eig.complex_pair}")

trace = ws_trace(base, 0.09)
print(f"W^s(q) on y = 0.09: {len(trace)} points, {trace.n_escaped} seeds escaped")

print("\nside of the turn along p (s = 1.37):")
for p in np.arange(0.03, 0.0801, 0.01):
    sign, delta = turn_regime(base.replace(p=float(p)))
    print(f"  p = {p:.3f}  side {sign:+d}  offset {delta:+.5f}")

y = default_section_height(base.eps)
p_t, res = tangency_point(base)
p_h, _ = hopf_point(base)
print(f"\non y = {y:.6f}: tangency at p = {p_t:.7f} (|offset| = {res:.1e}); Hopf at p = {p_h:.7f}")
