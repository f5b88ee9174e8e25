"""Stokes checks and primitives of top forms on the square.

Run: python demos/04_stokes_and_cohomology.py
"""
import numpy as np

from corner_moser import cube_atlas
from corner_moser.forms import FormField, integrate_top
from corner_moser.geometry import Domain, make_grid
from corner_moser.verify import cohomology_top_vanishes, convergence_study, stokes_check

# %% int d(x dy) over the square equals the signed boundary sum; both are 1.
grid = make_grid(Domain.cube(2), 33)
x, y = grid.coords()
res = stokes_check(FormField.build(grid, 1, {(1,): x}))
print("x dy:", res.lhs, res.rhs, "residual", res.residual)

# %% For a non-polynomial form the residual is O(h^2).
print(convergence_study("stokes-smooth", (17, 33, 65)).orders)

# %% Any top form is exact on the square: beta = I(alpha) + int(alpha) P with dP = omega.
# The defect is discretization error. It shrinks 2.3x then 3.1x over these grids
# and approaches the second-order 4x only on finer ones.
alpha = FormField.top(grid, np.exp(x - y))
w = cohomology_top_vanishes(alpha, cube_atlas(2))
print("int alpha =", integrate_top(alpha), " |d beta - alpha| =", w.residual)
for n in (33, 65, 129):
    g = make_grid(Domain.cube(2), n)
    gx, gy = g.coords()
    print(n, cohomology_top_vanishes(FormField.top(g, np.exp(gx - gy)), cube_atlas(2)).residual)
