"""Finitely many inclusions: exact resolvent, point-interaction limit, convergence study."""
from .basis import PolarBasis, TriangleBasis, make_basis
from .operators import (BSOperators, FiniteCrystal, LimitData, ResolventSamples, assemble_bs, bs_pairing,
                        bs_resolvent_apply, f_limit, factorization_resolvent_apply, pi_resolvent_apply)
from .study import ConvergenceResult, convergence_study, evaluation_grid, fit_through_origin
from .testfun import Gaussian, SampledFunction, gaussian_free_resolvent

__all__ = [
    "PolarBasis", "TriangleBasis", "make_basis", "BSOperators", "FiniteCrystal", "LimitData",
    "ResolventSamples", "assemble_bs", "bs_pairing", "bs_resolvent_apply", "f_limit",
    "factorization_resolvent_apply", "pi_resolvent_apply", "ConvergenceResult", "convergence_study",
    "evaluation_grid", "fit_through_origin", "Gaussian", "SampledFunction", "gaussian_free_resolvent",
]
