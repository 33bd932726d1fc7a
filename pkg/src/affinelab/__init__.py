"""Equiaffine invariants, parallel families and isoparametric functions of
locally strongly convex hypersurfaces, computed with truncated Taylor jets."""

__version__ = "0.1.0"
