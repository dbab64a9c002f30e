"""Desk-scale workbench for finite homogeneous structures.

Build and check amalgamation classes of finite models, compute automorphism
groups exhaustively, grow finite approximations of generic limits, and run
verification suites over the bundled class catalog.
"""

__version__ = "0.1.0"
