"""Floquet-Bloch fiber discretisation for the TM, TE and auxiliary operators."""
from .mesh import MeshSpec, build_mesh
from .assembly import assemble_operators
from .solve import FiberProblem, assemble_fiber, fiber_eigs, fiber_operators, pencil, solve_near
from .bands import (BandFunction, BandSet, Certificate, OverlapReport, SpectralDistance, band_set,
                    find_gaps, gaps_from_intervals, spectral_distance, te_overlap_check, tm_gap_certificate)

__all__ = [
    "MeshSpec", "build_mesh", "assemble_operators", "FiberProblem", "assemble_fiber", "fiber_eigs",
    "fiber_operators", "pencil", "solve_near", "BandFunction", "BandSet", "Certificate", "OverlapReport",
    "SpectralDistance", "band_set", "find_gaps", "gaps_from_intervals", "spectral_distance",
    "te_overlap_check", "tm_gap_certificate",
]
