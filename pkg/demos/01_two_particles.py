"""Two particles: the smallest minimizers that can be checked by hand.

An equal-mass pair under W(x) = -|x|^2/2 + |x|^4/4 settles at the root of
w'(r) = -r + r^3, i.e. distance 1. There the generated potential seen by
each particle equals twice the energy, which is the first-order condition
for a minimizer.

Moving mass between the two atoms breaks this. With masses (m, 1-m) and
W(x) = -x^2 + x^4/2 the energy is (m - 1/2)^2 / 2 - 1/8, lowest at equal
masses, and the unequal pair fails the optimality check.

Run:  python3 demos/01_two_particles.py
"""
import numpy as np

from swarmdim import (ParticleConfiguration, PotentialSpec, euler_lagrange_check, minimize,
                      total_energy)

spec = PotentialSpec.powerlaw(2.0, 4.0)
final, report = minimize(ParticleConfiguration([[0.0], [3.0]]), spec)
d = abs(final.positions[1, 0] - final.positions[0, 0])
print(f"start distance 3 -> {d:.9f} after {report.iterations} iterations ({report.termination.value})")

el = euler_lagrange_check(final, spec, tol=1e-9, link_distance=0.05)
print(f"V at particles {el.v_values}, 2E = {el.two_E}")
print(f"off-support samples {el.off_support_samples}, violations {el.off_support_violations}")

# energy of the two-atom measure as the mass split varies
quartic = PotentialSpec.powerlaw(2.0, 4.0, coeff_a=2.0, coeff_g=2.0)
print("\n   m      E(m)        (m-1/2)^2/2 - 1/8")
for m in np.linspace(0.1, 0.9, 9):
    E = total_energy(ParticleConfiguration([[0.0], [1.0]], [m, 1 - m]), quartic)
    print(f"{m:5.2f}  {E: .10f}  {0.5 * (m - 0.5) ** 2 - 0.125: .10f}")

el = euler_lagrange_check(ParticleConfiguration([[0.0], [1.0]], [0.3, 0.7]), quartic,
                          link_distance=0.05)
print(f"\nmasses (0.3, 0.7): V = {el.v_values}, 2E = {el.two_E:.4f}; "
      f"V is not constant, so this pair is not a minimizer")
