"""A one-dimensional Moser map compared with CDF inversion.

On [0,1] with mu0 = du and mu1 = (1/2 + u) du, the only increasing map
pulling mu1 back to mu0 is phi(u) = (-1 + sqrt(1 + 8u)) / 2.

Run: python demos/02_moser_1d.py
"""
import numpy as np

from corner_moser import cube_atlas, moser_map
from corner_moser.forms import FormField
from corner_moser.geometry import Domain, make_grid
from corner_moser.moser import knothe_1d, pullback_residual

# %% Sample both densities on 512 nodes.
grid = make_grid(Domain.cube(1), 512)
u = grid.axes[0]
mu0 = FormField.top(grid, np.ones_like(u))
mu1 = FormField.top(grid, 0.5 + u)

# %% psi = I(mu1 - mu0), eta_t = -psi / rho_t, then 200 RK4 steps from t = 0 to 1.
path, psi, flow = moser_map(mu0, mu1, cube_atlas(1), steps=200)
phi = flow.phi[:, 0]

# %% Compare with the closed form and with a discrete CDF inversion.
exact = (-1 + np.sqrt(1 + 8 * u)) / 2
print("sup |phi - exact| =", np.max(np.abs(phi - exact)))
print("sup |phi - knothe| =", np.max(np.abs(phi - knothe_1d(np.ones_like(u), 0.5 + u, u))))

# %% The pullback defect det(D phi) rho1(phi) - rho0.
rep = pullback_residual(flow, path)
print("relative pullback residual =", rep["relative_sup"], " endpoints:", phi[0], phi[-1])
