"""Simulation and exact-analysis toolkit for dissipative toric-code steady states.

Modules
-------
lattice    periodic 2d/3d lattices, loops and region counts
spins      link configurations, stabilizers, string and membrane operators
dynamics   Monte Carlo chains, ensembles and observables
exact      sparse generators, null spaces, spectra, XY mapping
perturb1   first-order splitting of the 2d steady states
analytics  closed-form steady-state results
oracle     brute-force enumeration on the smallest tori
fits       least-squares helpers for the experiment drivers
cli        command-line experiment harness
"""

__version__ = "0.1.0"
