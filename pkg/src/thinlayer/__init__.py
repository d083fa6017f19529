"""Numerical toolkit for diffusion across semi-permeable sticky membranes.

Core objects: 1D sticky-boundary generators on [0,1] and [-1,0], two-interval
membrane operators with closed-form (rank-2) resolvents, the fast-vertical
scaling limit onto a two-state jump system, a tensor-product 3D thin-layer
solver with the matching 2x2 limit reaction-diffusion system, discrete energy
forms, and an exact CTMC particle engine used as an independent oracle.
"""

__version__ = "0.1.0"
