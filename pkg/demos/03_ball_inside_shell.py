"""A minimizer with parts of different dimension (3D).

With -w'(r) = tanh(a(1 - r)) + b, a = 5, b = 0.5, the swarm splits into a
thin spherical shell (dimension two) around a small layered ball (dimension
three). The radial histogram shows the gap between them.

This is the slowest demo: n = 1000 in 3D takes a few minutes on one core.

Run:  python3 demos/03_ball_inside_shell.py
"""
import numpy as np

from swarmdim import MinimizerSettings, PotentialSpec, classify_dimension, init_configuration, minimize

spec = PotentialSpec.tanh(5.0, 0.5)
final, rep = minimize(init_configuration(1000, 3, seed=0), spec, MinimizerSettings(max_iters=3000))
dim = classify_dimension(final, spec)
print(f"{rep.termination.value} after {rep.iterations} iterations; classified_dim {dim.classified_dim}")
print("local dimension shares:", ", ".join(f"{d}:{s:.3f}" for d, s in enumerate(dim.local_dim_shares)))

h = dim.radial_histogram
scale = 60 / h[:, 1].max()
print("\ndistance   count")
for r, c in h:
    print(f"{r:8.3f} {int(c):6d} " + "#" * int(np.ceil(c * scale)))
