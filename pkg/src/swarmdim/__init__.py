"""Local minimizers of pairwise interaction energies and their dimensionality."""
from .potentials import (PotentialSpec, RepulsionClass, RepulsionKind, InvalidPotential,
                         SingularPairSignal, eval_w, eval_w_prime, eval_w_second, eval_gradient,
                         eval_laplacian, approx_laplacian_at, approx_laplacian_closed_form,
                         classify_repulsion, validate)
from .energy import (ParticleConfiguration, PairAccumulator, SingularPair, accumulate,
                     total_energy, forces, generated_potential, pair_distance_stats, diameter)
from .minimize import (Scheme, Termination, MinimizerSettings, RunReport, StepResult,
                       StepUnderflow, NumericalFailure, init_configuration, step_adaptive_euler,
                       step_rk4, minimize)
from .diagnostics import (DimensionReport, EulerLagrangeReport, correlation_integral,
                          estimate_correlation_dimension, cluster_decomposition,
                          classify_dimension, radial_histogram, riesz_energy,
                          euler_lagrange_check)
from .sweep import PhaseDiagram, fattening_curve_2d, run_sweep, emit_diagram, read_diagram

__version__ = "0.1.0"
