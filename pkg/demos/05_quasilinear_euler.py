"""Full pipeline on the quasilinear system: damped isentropic flow.

Characteristics bend with the state here (speeds v -+ c), so the solver
re-traces them through each iterate. The demo solves for the periodic
field at two resolutions, confirms the balance-law residual drops at
second order, verifies bounded second differences under refinement, and
measures the exponential return of a perturbed flow.
"""
import numpy as np

from periodic_hyp import (
    IterationConfig,
    bump_profile,
    extract_initial_data,
    norms,
    pde_residual,
    regularity_measurements,
    run,
    solve_periodic,
    stability_metrics,
)
from periodic_hyp import systems

EPS = 0.01

spec = systems.quasilinear_euler_damping(gamma=2.0, a=0.5, base_c=1.25)
bspec = systems.two_gain_boundary(
    0.5, 0.5,
    systems.harmonic_signal([{"amplitude": EPS}], 2.0),
    systems.harmonic_signal([{"amplitude": 0.5 * EPS, "phase": 1.0}], 2.0),
    2.0)

fields = {}
print("grid     sweeps   residual      d2t      dtdx      d2x")
for N in (64, 128):
    fld, rep = solve_periodic(spec, bspec, IterationConfig(Nt=N, Nx=N))
    fields[N] = fld
    reg = regularity_measurements(fld)
    print(f"{N:4d}^2  {rep.iterations:6d}  {pde_residual(fld, spec):9.2e}  "
          f"{reg.d2t:8.4f} {reg.dtdx:8.4f} {reg.d2x:8.4f}")
print("(second differences barely move under refinement: the periodic")
print(" solution stays twice differentiable, no derivative blow-up)")

fld = fields[128]
print(f"\nsup |u| of the fixed point: {norms(fld).c0:.5f}")

base = extract_initial_data(fld)
u0 = base + 0.5 * EPS * bump_profile(fld.x_nodes, spec.L)[:, None]
traj = run(u0, spec, bspec, t_end=8.0, record_every=0.2)
floor = run(base, spec, bspec, t_end=8.0, record_every=0.2)
rep = stability_metrics(traj, fld, spec, floor_traj=floor)
print(f"\ntransit time T0 = {rep.T0:.4f} (speeds stay above 1/T0 in modulus)")
print(f"fitted per-transit decay of the perturbation: {rep.fitted_decay:.4f}")
print(f"derivative deviations decay at {rep.fitted_derivative_decay:.4f}")
print("Phi at the first transit multiples:",
      np.array2string(np.array([p for _, _, p in rep.phi_at_T0[:6]]),
                      precision=2))
