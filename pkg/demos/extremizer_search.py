"""Search for an extremizer on two grids and compare the plateaus.

Run: python3 demos/extremizer_search.py
"""

from parext.extremize import IterationConfig, decay_report, el_iterate
from parext.grid import make_grid
from parext.operators import make_operator

for N in (64, 128):
    h = make_operator(make_grid(16.0, N))
    trace, f = el_iterate(IterationConfig(max_steps=200), h)
    final = trace.final
    print(f"N={N:4d}  steps={len(trace.steps):3d}  quotient={final.rayleigh:.6f}  "
          f"lambda={final.lam:.6f}  residual={final.residual:.2e}")

# how the extremizer compares with the weight upsilon far from the origin
rep = decay_report(f, 1e-6 * f.max_abs())
print(f"f / upsilon on the support: sup={rep['sup']:.3g}  inf={rep['inf']:.3g}")
