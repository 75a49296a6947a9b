"""Pure states, reproducible random sampling and expectation values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    HamiltonianSpec,
    PauliTerm,
    _n_sites_of,
    apply_hamiltonian,
    apply_pauli_string,
    site_signs,
)

STATE_MODES = ("haar", "product-random")

IMAG_TOL = 1e-10
IMAG_ABORT = 1e-8
NORM_TOL = 1e-12


class KernelError(RuntimeError):
    """An expectation value came out with a non-negligible imaginary part."""


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector of length ``2**n_sites``."""

    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_sites,):
            raise ValueError(f"expected {1 << self.n_sites} amplitudes, got shape {amps.shape}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = True) -> "StateVector":
        amps = np.array(amplitudes, dtype=np.complex128)
        if normalize:
            amps /= np.linalg.norm(amps)
        return cls(_n_sites_of(amps), amps)

    @classmethod
    def basis(cls, n_sites: int, bits) -> "StateVector":
        """Computational basis state; ``bits`` is an int index or a 0/1 sequence (site 0 first)."""
        if not isinstance(bits, (int, np.integer)):
            bits = list(bits)
            if len(bits) != n_sites:
                raise ValueError(f"need {n_sites} bits, got {len(bits)}")
            bits = int("".join(str(int(b)) for b in bits), 2)
        amps = np.zeros(1 << n_sites, dtype=np.complex128)
        amps[bits] = 1.0
        return cls(n_sites, amps)

    @classmethod
    def product(cls, site_states) -> "StateVector":
        """Tensor product of single-site 2-vectors, site 0 first."""
        amps = np.ones(1, dtype=np.complex128)
        for s in site_states:
            s = np.asarray(s, dtype=np.complex128)
            amps = np.kron(amps, s / np.linalg.norm(s))
        return cls.from_amplitudes(amps)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.amplitudes
        return self.amplitudes.astype(dtype)

    def __len__(self):
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class RngStream:
    """Independent random stream keyed by ``(master_seed, stream_id)``.

    Backed by a counter-based Philox generator seeded through
    ``SeedSequence(master_seed, spawn_key=(stream_id,))``; draws do not
    depend on which other streams exist or the order they are consumed in.
    """

    master_seed: int
    stream_id: int

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 1 << 64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(seq))


def make_stream_id(h_index: int, sample_index: int) -> int:
    """Pack ``(h_index, sample_index)`` into one 64-bit stream id."""
    if not (0 <= h_index < 1 << 31 and 0 <= sample_index < 1 << 32):
        raise ValueError("h_index or sample_index out of range")
    return (int(h_index) << 32) | int(sample_index)


def split_stream_id(stream_id: int) -> tuple[int, int]:
    return int(stream_id) >> 32, int(stream_id) & 0xFFFFFFFF


def draw_amplitudes(n_sites: int, stream: RngStream, mode: str = "haar", out=None) -> np.ndarray:
    """Normalized amplitudes for one stream, optionally written into ``out``."""
    dim = 1 << n_sites
    if out is None:
        out = np.empty(dim, dtype=np.complex128)
    rng = stream.generator()
    if mode == "haar":
        rng.standard_normal(out=out.view(np.float64))
    elif mode == "product-random":
        # Each site gets an independent Haar-random qubit state.
        sites = rng.standard_normal((n_sites, 4)).view(np.complex128)
        sites /= np.linalg.norm(sites, axis=1, keepdims=True)
        amps = np.ones(1, dtype=np.complex128)
        for s in sites:
            amps = np.kron(amps, s)
        out[:] = amps
    else:
        raise ValueError(f"unknown state mode {mode!r}; expected one of {STATE_MODES}")
    flat = out.view(np.float64)
    out /= np.sqrt(flat @ flat)
    return out


def random_state(n_sites: int, stream: RngStream, mode: str = "haar") -> StateVector:
    """Random pure state; ``haar`` mode normalizes i.i.d. complex Gaussians."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    return StateVector(n_sites, draw_amplitudes(n_sites, stream, mode))


def _real_expectation(value: complex) -> float:
    im = abs(value.imag)
    if im > IMAG_ABORT:
        raise KernelError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def expectation_energy(state, spec: HamiltonianSpec) -> float:
    """``Re <psi|H|psi>`` via the matrix-free apply."""
    psi = np.asarray(state)
    return _real_expectation(np.vdot(psi, apply_hamiltonian(psi, spec)))


def expectation_pauli(state, term: PauliTerm) -> float:
    """``<psi|P|psi>`` of a Pauli string; ``term.coefficient`` is not applied."""
    psi = np.asarray(state)
    return _real_expectation(np.vdot(psi, apply_pauli_string(psi, term)))


def magnetization(state) -> tuple[float, np.ndarray]:
    """Mean Z magnetization and the per-site ``<Z_i>`` vector."""
    psi = np.asarray(state)
    z = site_z_batch(psi[None, :], _n_sites_of(psi))[0]
    return float(z.mean()), z


# Batched kernels: ``amps`` has shape (batch, 2**n).


def probabilities(amps: np.ndarray) -> np.ndarray:
    return amps.real ** 2 + amps.imag ** 2


def _half_signs(n_sites: int):
    n_hi = n_sites // 2
    return n_hi, site_signs(n_hi), site_signs(n_sites - n_hi)


def site_z_batch(amps: np.ndarray, n_sites: int) -> np.ndarray:
    """``<Z_i>`` for every state and site, shape (batch, n)."""
    return z_moments(probabilities(amps), n_sites)[0]


def z_moments(probs: np.ndarray, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """First and second Z moments from basis probabilities.

    Splits the index into high and low halves so every ``<Z_i Z_j>`` comes
    from a ``2**(n/2)``-sized marginal or one bilinear form, O(2**n * n) total.
    Returns ``(z, zz)`` with shapes (batch, n) and (batch, n, n).

    States are processed one at a time so every result is bitwise
    independent of the batch it was computed in.
    """
    n_hi, s_hi, s_lo = _half_signs(n_sites)
    batch = probs.shape[0]
    z = np.empty((batch, n_sites))
    zz = np.empty((batch, n_sites, n_sites))
    for b in range(batch):
        P = probs[b].reshape(1 << n_hi, 1 << (n_sites - n_hi))
        row = P.sum(axis=1)
        col = P.sum(axis=0)
        z[b, :n_hi] = s_hi @ row
        z[b, n_hi:] = s_lo @ col
        zz[b, :n_hi, :n_hi] = (s_hi * row) @ s_hi.T
        zz[b, n_hi:, n_hi:] = (s_lo * col) @ s_lo.T
        cross = (s_hi @ P) @ s_lo.T
        zz[b, :n_hi, n_hi:] = cross
        zz[b, n_hi:, :n_hi] = cross.T
    return z, zz


def x_expectations_batch(amps: np.ndarray, n_sites: int) -> np.ndarray:
    """``<X_i>`` for every state and site, shape (batch, n)."""
    # Re(conj(a) b) is the dot product of the interleaved (re, im) pairs.
    flat = np.ascontiguousarray(amps, dtype=np.complex128).view(np.float64)
    batch = amps.shape[0]
    out = np.empty((batch, n_sites))
    for site in range(n_sites):
        v = flat.reshape(batch, 1 << site, 2, 2 << (n_sites - 1 - site))
        out[:, site] = 2.0 * np.einsum("bac,bac->b", v[:, :, 0, :], v[:, :, 1, :])
    return out


def energy_from_moments(spec: HamiltonianSpec, zz: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Energy of each state from its Pauli expectations (linearity of ``<H>``)."""
    J, h = float(spec.coupling_J), float(spec.field_h)
    energy = np.zeros(zz.shape[0])
    for i, j, m in spec.bonds:
        energy += (-J * m) * zz[:, i, j]
    energy += -h * x.sum(axis=1)
    return energy
