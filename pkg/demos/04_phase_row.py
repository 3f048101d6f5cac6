"""Crossing two analytic boundaries along gamma = 5 (2D).

Increasing alpha at fixed gamma = 5 moves the minimizer from a disk (2D) to
a ring (1D) when alpha crosses gamma/(gamma-1) = 1.25, and from a ring to
points (0D) at alpha = 2, where repulsion turns mild. This runs the same
sweep machinery as `swarmdim sweep` with a majority vote over seeds, then
writes diagram.json, a text grid and the boundary curves.

Run:  python3 demos/04_phase_row.py       (about 5 minutes at n = 300)
      swarmdim sweep demos/configs/gamma5_row.ini   (same, at n = 600)
"""
from pathlib import Path

from swarmdim import MinimizerSettings, emit_diagram, fattening_curve_2d, run_sweep

alphas = [0.01, 1.1, 1.5, 2.2]
out = Path(__file__).with_name("out_phase_row")
diagram = run_sweep([5.0], alphas, 2, 300, seeds=(0, 1, 2),
                    settings=MinimizerSettings(max_iters=4000),
                    progress=lambda c: print(f"alpha={c.alpha:<5g} majority dim {c.majority_dim} "
                                             f"(agreement {c.agreement:.2f})", flush=True))
emit_diagram(diagram, out)
print(f"\nfattening boundary alpha = {fattening_curve_2d(5.0):g}, mild repulsion above alpha = 2")
print((out / "diagram.txt").read_text())
