"""Fair, detour-constrained route recommendation for ridesharing fleets."""

__version__ = "0.1.0"
