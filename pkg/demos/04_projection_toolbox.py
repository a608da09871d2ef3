"""Tour of the projection layer backing the controllers.

Covers the three constraint families, the KKT diagnostics of the
polyhedral solver, the strict-feasibility and zero-feasibility predicates,
and the projected-gradient fixed-point solver that reproduces the
controller output.
"""

import numpy as np

from lurestab import (
    AffineInequalities,
    HalfspacePlusBox,
    ProjectionController,
    StateBox,
    eval_controller,
    fixed_point_solve,
    proj_box,
    proj_halfspace,
    proj_polyhedron,
    strictly_feasible,
    zero_feasible,
)

print("== elementary projections ==")
print("clamp (2, -3) to [-1,1]^2        ->", proj_box([2.0, -3.0], [-1, -1], [1, 1]))
print("project (3, 0) onto u1+u2 <= 1   ->", proj_halfspace([3.0, 0.0], [1.0, 1.0], 1.0))

print("\n== polyhedral projection with KKT diagnostics ==")
rows = np.vstack([[0.0, -1.0], np.eye(2), -np.eye(2)])
bounds = np.array([0.45, 1.0, 1.0, 1.0, 1.0])
res = proj_polyhedron([-3.25, -6.5], rows, bounds)
print(f"projection of (-3.25, -6.5): {res.u}")
print(f"active rows {res.active_constraints}, KKT residual {res.kkt_residual:.1e}, "
      f"{res.iterations} sweeps")

print("\n== the three constraint families at a frozen state ==")
x = np.array([0.4, 0.8])
families = {
    "StateBox, v(x) = exp(-|x|^2/2) 1": StateBox(
        bound=lambda x: np.exp(-0.5 * float(x @ x)) * np.ones(2)),
    "HalfspacePlusBox (CBF row + box)": HalfspacePlusBox(
        normal=lambda x: np.array([-2.0 * x[0], -2.0 * (x[1] - 4.0)]),
        offset=lambda x: float(x[0] ** 2 + (x[1] - 4.0) ** 2 - 4.0),
        box_bound=1.0),
    "AffineInequalities (5 rows)": AffineInequalities(
        matrix=lambda x: np.vstack([[1.0, 1.0], np.eye(2), -np.eye(2)]),
        bound=lambda x: np.array([1.5, 1.0, 1.0, 1.0, 1.0])),
}
for name, family in families.items():
    print(f"{name:<36} strictly feasible: {strictly_feasible(family, x)!s:<5} "
          f"zero feasible: {zero_feasible(family, x)}")

print("\n== fixed-point solver vs direct controller evaluation ==")
gain = np.array([[-2.0, -0.5], [-0.5, -1.0]])
family = families["HalfspacePlusBox (CBF row + box)"]
controller = ProjectionController(gain=gain, family=family)
state = np.array([0.0, 6.5])
direct = eval_controller(controller, state).u
rows_at_state = np.vstack([family.normal(state), np.eye(2), -np.eye(2)])
bounds_at_state = np.concatenate([[family.offset(state)], np.ones(4)])
via_fixed_point = fixed_point_solve(
    grad_f=lambda z, u: u - z,
    lipschitz=1.0,
    project=lambda u: proj_polyhedron(u, rows_at_state, bounds_at_state).u,
    z=gain @ state,
    u0=np.zeros(2),
    gamma=0.5,
    tol=1e-11,
)
print(f"direct projection     u* = {direct}")
print(f"fixed-point iteration u* = {via_fixed_point}")
print(f"difference: {np.linalg.norm(direct - via_fixed_point):.2e}")
