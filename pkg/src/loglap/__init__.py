"""Numerical toolkit for the logarithmic Laplacian (Fourier symbol 2 log|xi|).

Submodules
----------
special   closed-form constants, Gamma/psi
geometry  domains, meshes, kernel-geometry integrals
pointops  pointwise operator evaluation, Fourier route, barrier
assembly  Galerkin discretization of the quadratic forms
spectral  eigenvalue studies, maximum-principle classification
poisson   Poisson solves and boundary-decay profiling
cli       command-line front end
"""

__version__ = "0.1.0"
