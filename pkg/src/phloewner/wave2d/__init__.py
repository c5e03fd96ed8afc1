"""Mixed finite element model of the damped 2D wave equation on an L-shape."""

from .fem import (FAR_POINT, FEMatrices, WaveParams, assemble, discrete_hamiltonian, far_channel,
                  fom_realization, p1_gradients, sample_fom)
from .mesh import Mesh, mesh_lshape, mesh_rectangle
from .timestep import HamiltonianTrace, MidpointIntegrator, step_midpoint

__all__ = [
    "FAR_POINT", "FEMatrices", "HamiltonianTrace", "Mesh", "MidpointIntegrator", "WaveParams",
    "assemble", "discrete_hamiltonian", "far_channel", "fom_realization", "mesh_lshape",
    "mesh_rectangle", "p1_gradients", "sample_fom", "step_midpoint",
]
