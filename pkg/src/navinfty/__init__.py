"""Critical points at infinity for a fourth-order Navier boundary value problem.

Library layout:

- numerics: deterministic quadrature, eigenvalue, and ODE kernels
- domain_green: biharmonic Green function with Navier conditions
- bubble_core: concentration profiles, projections, functional and gradient
- k_model: synthetic curvature-like weights with flat critical points
- infinity_calculus: classification, interaction matrices, existence criteria
- pseudoflow: explicit pseudo-gradient fields and their flows
- cli: command line front end
"""

__version__ = "0.1.0"
