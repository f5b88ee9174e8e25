"""Primitive operators and Moser flows on partial quadrants and the cube."""
from .banyaga import (
    Atlas, ReferenceForm, banyaga, banyaga_1d, banyaga_cube, banyaga_quadrant, banyaga_tilde,
    change_omega, corner_correction, cube_atlas, identity_residual, reference_form,
)
from .bump import BumpSpec, eval_bump, eval_bump_derivative
from .errors import *  # noqa: F401,F403
from .forms import (
    ChartMap, FormField, exterior_derivative, integrate_top, interior_product, max_trace,
    product_bump, pullback_chart, slice_last_axis, trace_on_stratum,
)
from .geometry import Domain, Grid, Stratum, make_grid, quadrature_weights, strata, stratum_nodes
from .moser import (
    DensityPath, FlowMap, TimeVectorField, boundary_identity_check, build_path, integrate_flow,
    moser_map, pullback_residual, solve_eta, solve_psi,
)
from .verify import (
    ConvergenceReport, MollifierCheck, cohomology_top_vanishes, convergence_study,
    mollifier_bound_check, relative_class_check, stokes_check,
)

__version__ = "0.1.0"
