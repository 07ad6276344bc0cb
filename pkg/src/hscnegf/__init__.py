"""Diagonal blocks of the retarded and lesser Green's functions for NEGF.

Two solvers compute ``diag(G^r)`` and ``diag(G^<)`` of a sparse
complex-symmetric ``A(E) = E I - H - Sigma^r``:

* :mod:`hscnegf.rgf`, the recursive Green's function method on layers;
* :mod:`hscnegf.hsc`, a hierarchical Schur complement solver on a
  nested-dissection separator tree.

:mod:`hscnegf.oracle` provides dense reference results for testing.
"""

from .blocks import (ClusterBlockMatrix, ContactBlock, GreensDiagonal, SparseCoo,
                     assemble_system, group_by_partition)
from .dense import FlopLedger, adjoint, as_cmatrix, inverse, matmul, rel_frobenius
from .device import (Device, GrapheneSpec, SuperlatticeSpec, SyntheticSpec,
                     build_graphene_hamiltonian, build_superlattice_hamiltonian,
                     build_synthetic_device, contact_self_energies, fermi,
                     lesser_self_energy, surface_self_energy)
from .errors import (ConfigError, ConvergenceError, HscNegfError, NonSkewHermitianInput,
                     NumericalError, PartitionViolation, ResidualTooLarge, ShapeMismatch,
                     SingularBlock)
from .hsc import HscFactorization, hsc_fold, hsc_gless, hsc_gr, hsc_solve
from .observables import (DensityMap, EnergyGrid, electron_density, ldos, line_density_y,
                          mirror_asymmetry)
from .oracle import dense_gless, dense_gr
from .partition import (SeparatorTree, nested_dissection, rgf_chain_partition,
                        validate_partition)
from .rgf import LayeredSystem, rgf_gless, rgf_gr, rgf_solve
from .simulate import Conditions, bench_point, solve_energy

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
