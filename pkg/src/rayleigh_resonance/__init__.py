"""Wavenumber resonances of the isotropic Rayleigh system on a half space
with a heterogeneous slab."""

__version__ = "0.1.0"
