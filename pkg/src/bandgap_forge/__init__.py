"""High-contrast photonic crystals with gaps at prescribed locations.

Modules: geometry (lattices, shapes, crystal specs), specfun (free Green's
function), latticesum (regularised dual-lattice sums, Q matrices), pointspec
(point-interaction band edges), design (inverse design), bloch (finite-element
Bloch fibers and certificates), approx (finite-inclusion resolvents) and cli.
"""
__version__ = "0.1.0"
