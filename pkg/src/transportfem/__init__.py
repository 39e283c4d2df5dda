"""Structure-preserving P1 finite elements for boundary-controlled transport.

The package assembles 1D (fixed and moving mesh) and 2D (fixed mesh)
semi-discrete transport models whose matrices carry the scattering energy
structure of the continuous equations, integrates them with schemes that
respect that structure, and audits the resulting energy balance.
"""

from .errors import (ConfigError, DegenerateMeshError, InstabilityError,
                     NonPositiveDensityError, NumericalFailure)
from .mesh1d import (Mesh1D, MeshMotion, log_concentrated_mesh, mirrored,
                     nodes_at, node_velocities_at, static_motion,
                     traveling_motion, uniform_mesh, write_trajectory_csv)
from .fem1d import (HamiltonianDensity, SystemMatrices1D, assemble_convection,
                    assemble_energy, assemble_fixed, assemble_mass,
                    assemble_motion_coupling, assemble_moving, coenergy,
                    constant_density, density_from_callable, interpolate,
                    project_initial, solve_spd_tridiagonal)
from .fem2d import (BoundaryClassification, Matrices2D, Mesh2D,
                    VelocityField2D, assemble_2d, assemble_mass_2d,
                    classify_boundary, constant_field, field_from_callables,
                    inflow_quadratic, input_load_2d, outflow_quadratic,
                    project_initial_2d, rect_mesh, write_mesh_csv,
                    write_snapshot_csv)
from .integrator import (MatrixTimeline, SimConfig, TimeSeries, TimeSeries2D,
                         Transport1DProblem, Transport2DProblem,
                         make_input_signal, rk4_stability_limit, simulate_1d,
                         simulate_2d, step_midpoint, step_rk4)
from .diagnostics import (EnergyLedger, IdentityCheck, IdentityReport,
                          analytic_1d_state, analytic_delay_output,
                          analytic_output, balance_audit, balance_audit_2d,
                          fixed_identity_battery, hamiltonian,
                          identity_battery_2d, l2_error_1d,
                          moving_identity_battery, output_l2_error,
                          overshoot_metric, write_ledger_csv)

__version__ = "0.1.0"
