"""Reaction-network analysis: structure, complex-balancing, simulation and
rate-perturbation probes for mass-action systems."""
from .complex_balance import (CBReport, TreeConstants, cb_residual, check_complex_balance, linear_stability,
                              solve_cb_steady_state, toric_membership, tree_constants)
from .dynamics import IntegratorConfig, Trajectory, integrate, integrate_variable, lyapunov_descent_check
from .equivalence import (cb_region_probe_ex45, dynamically_equivalent, polynomial_map,
                          reparameterize_ex45)
from .kinetics import (LyapunovContext, RateAssignment, RateSchedule, jacobian, lyapunov_lie_derivative,
                       lyapunov_value, rhs, rhs_variable)
from .network import (ReactionNetwork, StoichAnalysis, compatibility_class_membership, deficiency,
                      format_network, linkage_classes, load_network, parse_network, stoichiometric_subspace,
                      weak_reversibility)
from .robustness import (PerturbationPlan, bifurcation_scan_1d, global_stability_probe, perturb_sample,
                         permanence_probe)

__version__ = "0.1.0"
