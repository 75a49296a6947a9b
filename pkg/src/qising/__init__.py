"""Random-state datasets for the 2D transverse-field quantum Ising model."""

__version__ = "0.1.0"

from .lattice import LatticeSpec, PairDistanceIndex, build_lattice, pairs_at_distance
from .operators import (
    HamiltonianSpec,
    PauliAxis,
    PauliTerm,
    apply_hamiltonian,
    apply_pauli_string,
    build_hamiltonian_dense,
    extended_pauli,
)
from .states import (
    RngStream,
    StateVector,
    expectation_energy,
    expectation_pauli,
    magnetization,
    random_state,
)
from .entanglement import (
    SchmidtSpectrum,
    half_split_entropy,
    schmidt_spectrum,
    von_neumann_entropy,
)
from .sampler import (
    CorrelatorAccumulator,
    Dataset,
    SampleRecord,
    SweepConfig,
    read_dataset,
    run_sweep,
    write_dataset,
    write_manifest,
)

__all__ = [
    "CorrelatorAccumulator",
    "Dataset",
    "HamiltonianSpec",
    "LatticeSpec",
    "PairDistanceIndex",
    "PauliAxis",
    "PauliTerm",
    "RngStream",
    "SampleRecord",
    "SchmidtSpectrum",
    "StateVector",
    "SweepConfig",
    "apply_hamiltonian",
    "apply_pauli_string",
    "build_hamiltonian_dense",
    "build_lattice",
    "expectation_energy",
    "expectation_pauli",
    "extended_pauli",
    "half_split_entropy",
    "magnetization",
    "pairs_at_distance",
    "random_state",
    "read_dataset",
    "run_sweep",
    "schmidt_spectrum",
    "von_neumann_entropy",
    "write_dataset",
    "write_manifest",
]
