"""Dissipative quantum-classical hybrid system simulator.

A fast spin-1/2 coupled to a slow classical magnetic dipole.  The package
covers both directions of the coupling:

* a dissipative spin acting back on the particle through the geometric
  vector potential of its non-Hermitian effective Hamiltonian, and
* a damped classical particle driving a decoherence-free spin.

Units throughout: hbar = 1, energies in mu|B| at the scenario reference point.
"""

__version__ = "0.1.0"
