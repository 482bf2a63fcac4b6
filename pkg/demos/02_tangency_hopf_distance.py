"""Distance between the sharp-turn point and the Hopf curve, in units of eps.

The turn point is where the tangency curve meets the splitting curve.  Its
Euclidean distance to the Hopf curve in the (p, s) plane stays close to eps.

Run: python3 demos/02_tangency_hopf_distance.py [eps] [s_start]
(eps = 1e-2 takes about 1.5 min, eps = 1e-3 with s_start = 1.5 about 3.5 min)
"""

import sys

from fhn_homoclinic.core_model import Params
from fhn_homoclinic.manifold_scan import tangency_hopf_distance

eps = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-2
s0 = float(sys.argv[2]) if len(sys.argv) > 2 else 1.37
r = tangency_hopf_distance(Params(p=0.05, s=s0), eps)
print(f"eps = {eps:g}, section y = {r.y_section:.6f}")
print(f"turn point   (p, s) = ({r.tangency_p:.7f}, {r.tangency_s:.7f})")
print(f"nearest Hopf (p, s) = ({r.hopf_p:.7f}, {r.hopf_s:.7f})")
print(f"D = {r.distance:.6g},  D/eps = {r.ratio:.5f}")
