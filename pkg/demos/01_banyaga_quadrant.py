"""Primitive operator on the partial quadrant Q^2_2 and on the unit square.

Run: python demos/01_banyaga_quadrant.py
"""
import numpy as np

from corner_moser import banyaga, cube_atlas, reference_form
from corner_moser.bump import BumpSpec
from corner_moser.forms import FormField, integrate_top, max_trace
from corner_moser.geometry import Domain, make_grid
from corner_moser.banyaga import identity_residual

# %% A smooth top form alpha on [0,1]^2 seen as a chart of Q^2_2 (both axes clamped at 0).
grid = make_grid(Domain.quadrant(2, 2), 65)
x, y = grid.coords()
alpha = FormField.top(grid, np.exp(-8 * (x**2 + y**2)) * (1 - x) ** 4 * (1 - y) ** 4 * (1 + x * y))
print("int alpha =", integrate_top(alpha))

# %% The reference density omega is a product of 1D bumps with unit mass.
ref = reference_form(grid, [BumpSpec.unit(0.07, 0.93)] * 2)
print("int omega =", integrate_top(ref.omega))

# %% I(alpha) is a 1-form with d I(alpha) = alpha - omega int(alpha), up to O(h^2).
I = banyaga(alpha, ref)
print("identity residual =", identity_residual(alpha, I, ref.omega).sup())

# %% Its tangential trace on both clamped faces and at the corner is zero to rounding.
print("largest boundary trace =", max_trace(I))

# %% On the unit square the operator is glued from reflected quadrant charts.
# Each chart's bump must fit inside a quarter of the side, so omega is narrow
# and the h^2 constant is large: the residual is still far from small at 65^2.
sq = make_grid(Domain.cube(2), 65)
atlas = cube_atlas(2)
a = FormField.top(sq, 1 + 0.5 * np.sin(np.pi * sq.coords()[0]))
Ia = banyaga(a, atlas)
print("square: identity residual =", identity_residual(a, Ia, atlas.reference(sq).omega).sup(),
      " trace =", max_trace(Ia))
