"""Continuation solver and verification suite for vortex-type equations
on discretized compact complex surfaces.

The package deforms a fiber metric on a holomorphic pair (bundle plus
section) along a one-parameter family of perturbed equations, from the
exactly solvable end down to the equation of interest, checking the
analytic certificates (a priori bounds, energy identities, stability
windows) at every accepted state. A Higgs-field variant shares the
machinery.

Layout:
    fiber         pointwise spectral calculus on Hermitian matrix fields
    geometry      discretized base manifolds (flat torus, circle
                  reduction of a non-Kahler surface)
    pair          problem container and the slope stability analyzer
    continuation  the perturbed-equation homotopy driver
    higgs         Higgs-bundle variant
    instances     the shipped desk-scale problem registry
    reporting     CSV / JSON / SVG output
    cli           command line front end
"""

__version__ = "0.1.0"

from .fiber import ClampError
from .geometry import make_backend
from .pair import PairProblem, SplitModel, stability_report
from .continuation import (ContinuationConfig, initial_gauge,
                           run_continuation, residual_L,
                           linearization_apply, uniqueness_probe)

__all__ = [
    "ClampError", "make_backend", "PairProblem", "SplitModel",
    "stability_report", "ContinuationConfig", "initial_gauge",
    "run_continuation", "residual_L", "linearization_apply",
    "uniqueness_probe", "__version__",
]
