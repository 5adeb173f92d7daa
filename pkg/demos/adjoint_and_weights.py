"""Check the discrete adjoint pairing, then estimate two A_p constants."""

import numpy as np

from parext.grid import SampledField, inner_product, make_grid
from parext.operators import apply_T, apply_T_star, make_operator
from parext.weights import WeightKind, WeightSpec, ap_constant, axis_family

h = make_operator(make_grid(8.0, 128), n_t=256)
rng = np.random.default_rng(0)
f = SampledField(h.grid, rng.standard_normal((128, 128)))
g = SampledField(h.grid, rng.standard_normal((128, 128)))
lhs, rhs = inner_product(apply_T(h, f), g), inner_product(f, apply_T_star(h, g))
print(f"<Tf, g> = {lhs:.12f}   <f, T*g> = {rhs:.12f}   gap = {abs(lhs - rhs):.1e}")

for s in (0.5, 1.5):
    spec = WeightSpec(WeightKind.AXIS_POWER, s=s)
    # same largest disc, two extra octaves of small discs in the second ladder
    vals = [ap_constant(spec, 2.0, axis_family(r_min, K)).value for r_min, K in ((1.0, 6), (0.25, 8))]
    print(f"|x1|^{s}: A_2 over discs down to radius 1 -> {vals[0]:.4f}, down to 1/4 -> {vals[1]:.4f}")
