"""Return map of the saddle-focus model: homoclinic values and fixed points.

The flow past the equilibrium is linear; the global return is a thin
parabolic strip.  When lambda2 > 0 two values of lambda1 give a homoclinic
orbit; just beside them the return map has fixed points of saddle type.

Run: python3 demos/03_geometric_return_map.py   (a few seconds)
"""

from fhn_homoclinic.shilnikov_model import (
    ShilnikovModelParams,
    find_periodic_points,
    homoclinic_parameters,
    recurrence_check,
    wu_probe,
)

model = ShilnikovModelParams(alpha_rot=1.0, beta=0.1, gamma=1.0, rho=10.0, sigma=0.05,
                             lambda2=0.02, lambda3=0.0)
lam_plus, lam_minus = homoclinic_parameters(model)
print(f"homoclinic lambda1 = {lam_plus:.10f}, {lam_minus:.10f}")
print(f"W^u probe height at lambda1+: {wu_probe(model.replace(lambda1=lam_plus)).w:.1e}")

near = model.replace(lambda1=lam_plus + 1e-4)
print(f"recurrent: {recurrence_check(near)}")
for pp in find_periodic_points(near):
    mults = ", ".join(f"{abs(m):.3g}" for m in pp.multipliers)
    print(f"  period {pp.period}: v = {pp.point.v:.10f}, w = {pp.point.w:.4e}, |multipliers| = {mults}")

print(f"lambda2 = -2 sigma: {len(find_periodic_points(model.replace(lambda2=-0.1)))} points")
