"""Singularities and bifurcations of nonlinear resistor networks with negative edges."""

from .conductance import ConductanceModel, CubicNegative, Linear, TanhNegative
from .continuation import (BifurcationDiagram, Branch, ContinuationPath, Sample, SpecialPoint,
                           detect_special_points, stability_of, trace)
from .equilibrium import (EquilibriumProblem, EquilibriumSolution, internal_state,
                          reduced_laplacian, solve_full, solve_internal, terminal_currents)
from .errors import *  # noqa: F401,F403
from .graph_core import (Definiteness, NodePartition, SignedGraph, SingularGainCertificate,
                         assemble_laplacian, classify_definiteness, corank,
                         effective_resistance, kron_reduce, pseudoinverse, singular_gain)
from .netfile import emit_network, load_fig1, network_to_dict, parse_network
from .network import NetworkModel, laplacian_at, nodal_currents, potential_K
from .singularity import (BifurcationClass, BifurcationKind, LSCoefficients, SingularityReport,
                          Source, classify_bifurcation, detect_singularity,
                          ls_coefficients_closed_form, ls_coefficients_fd, ultrasensitivity_gain)

__version__ = "0.1.0"
