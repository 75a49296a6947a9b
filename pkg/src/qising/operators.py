"""Pauli operators and the transverse-field Ising Hamiltonian.

Bit convention used throughout the package: site 0 is the most significant
bit of a basis-state index, and bit value 0 is spin-up (Z eigenvalue +1).
A state vector reshaped C-order to ``(2,) * n`` therefore has site ``i`` on
axis ``i``.

The dense builders exist for tests and eigen-oracles only. Sampling goes
through :func:`apply_hamiltonian` and friends, which never form a
``2**n x 2**n`` matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import LatticeSpec

DENSE_MAX_SITES = 14

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


class PauliAxis(enum.Enum):
    X = "X"
    Z = "Z"


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    factors: tuple[tuple[int, PauliAxis], ...]

    def __post_init__(self):
        sites = [s for s, _ in self.factors]
        if not sites:
            raise ValueError("a Pauli term needs at least one factor")
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise ValueError(f"factor sites must be strictly increasing, got {sites}")
        if sites[0] < 0:
            raise ValueError("negative site index")

    @classmethod
    def z(cls, site: int, coefficient: float = 1.0) -> "PauliTerm":
        return cls(coefficient, ((site, PauliAxis.Z),))

    @classmethod
    def x(cls, site: int, coefficient: float = 1.0) -> "PauliTerm":
        return cls(coefficient, ((site, PauliAxis.X),))

    @classmethod
    def zz(cls, i: int, j: int, coefficient: float = 1.0) -> "PauliTerm":
        i, j = sorted((i, j))
        return cls(coefficient, ((i, PauliAxis.Z), (j, PauliAxis.Z)))

    @property
    def max_site(self) -> int:
        return self.factors[-1][0]


@dataclass(frozen=True)
class HamiltonianSpec:
    """``H = -J sum_<ij> m_ij Z_i Z_j - h sum_i X_i`` on a lattice."""

    lattice: LatticeSpec
    coupling_J: float
    field_h: float
    dedup_bonds: bool = False

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @property
    def bonds(self) -> tuple[tuple[int, int, int], ...]:
        if self.dedup_bonds:
            return self.lattice.deduplicated().bonds
        return self.lattice.bonds

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        J, h = float(self.coupling_J), float(self.field_h)
        zz = tuple(PauliTerm.zz(i, j, -J * m) for i, j, m in self.bonds)
        xs = tuple(PauliTerm.x(i, -h) for i in range(self.n_sites))
        return zz + xs

    def haar_energy_variance(self) -> float:
        """Variance of ``<psi|H|psi>`` over Haar-random pure states.

        For a traceless H this is ``tr(H^2) / (d (d + 1))`` with
        ``tr(H^2) = d * sum of squared Pauli coefficients``.
        """
        sq = sum(t.coefficient ** 2 for t in self.terms)
        return sq / (self.dim + 1)


def _as_amplitudes(state) -> np.ndarray:
    psi = np.asarray(state)
    if psi.ndim != 1:
        raise ValueError(f"expected a 1-d amplitude vector, got shape {psi.shape}")
    return psi


def _n_sites_of(psi: np.ndarray) -> int:
    n = int(psi.shape[-1]).bit_length() - 1
    if n < 0 or psi.shape[-1] != 1 << n:
        raise ValueError(f"state length {psi.shape[-1]} is not a power of two")
    return n


def _site_view(psi: np.ndarray, n: int, site: int) -> np.ndarray:
    # (..., left, 2, right): middle axis is the bit of `site`.
    return psi.reshape(psi.shape[:-1] + (1 << site, 2, 1 << (n - 1 - site)))


def extended_pauli(n_sites: int, site: int, axis: PauliAxis | str) -> np.ndarray:
    """Dense ``I^(site) (x) sigma (x) I^(n - site - 1)``."""
    axis = PauliAxis(axis)
    if n_sites < 1 or n_sites > DENSE_MAX_SITES:
        raise ValueError(f"dense operators limited to 1..{DENSE_MAX_SITES} sites, got {n_sites}")
    if not 0 <= site < n_sites:
        raise IndexError(f"site {site} out of range for {n_sites} sites")
    sigma = SIGMA_X if axis is PauliAxis.X else SIGMA_Z
    left = np.eye(1 << site, dtype=np.complex128)
    right = np.eye(1 << (n_sites - site - 1), dtype=np.complex128)
    return np.kron(np.kron(left, sigma), right)


def pauli_string_dense(n_sites: int, term: PauliTerm) -> np.ndarray:
    op = np.eye(1 << n_sites, dtype=np.complex128)
    for site, axis in term.factors:
        op = op @ extended_pauli(n_sites, site, axis)
    return term.coefficient * op


def build_hamiltonian_dense(spec: HamiltonianSpec) -> np.ndarray:
    n = spec.n_sites
    if n > DENSE_MAX_SITES:
        raise ValueError(f"dense Hamiltonian limited to {DENSE_MAX_SITES} sites, got {n}")
    zs = [extended_pauli(n, i, PauliAxis.Z) for i in range(n)]
    H = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    for i, j, m in spec.bonds:
        H -= spec.coupling_J * m * (zs[i] @ zs[j])
    for i in range(n):
        H -= spec.field_h * extended_pauli(n, i, PauliAxis.X)
    return H


def site_signs(n_sites: int, sites=None) -> np.ndarray:
    """Z eigenvalues ``+-1`` of the given sites for every basis index, shape (len(sites), 2**n)."""
    if sites is None:
        sites = range(n_sites)
    idx = np.arange(1 << n_sites, dtype=np.int64)
    shifts = n_sites - 1 - np.asarray(list(sites), dtype=np.int64)
    bits = (idx[None, :] >> shifts[:, None]) & 1
    return (1 - 2 * bits).astype(np.float64)


@lru_cache(maxsize=32)
def _zz_diagonal(n_sites: int, weighted_bonds: tuple[tuple[int, int, float], ...]) -> np.ndarray:
    diag = np.zeros(1 << n_sites)
    if not weighted_bonds:
        return diag
    signs = site_signs(n_sites)
    for i, j, coef in weighted_bonds:
        diag += coef * (signs[i] * signs[j])
    diag.setflags(write=False)
    return diag


def zz_diagonal(spec: HamiltonianSpec) -> np.ndarray:
    """Diagonal of the ZZ part of H (a length ``2**n`` vector, cached)."""
    weighted = tuple((i, j, -float(spec.coupling_J) * m) for i, j, m in spec.bonds)
    return _zz_diagonal(spec.n_sites, weighted)


def apply_pauli_string(state, term: PauliTerm, n_sites: int | None = None) -> np.ndarray:
    """Return ``P|psi>`` for the Pauli string of ``term`` (coefficient ignored)."""
    psi = _as_amplitudes(state)
    n = _n_sites_of(psi)
    if n_sites is not None and n != n_sites:
        raise ValueError(f"state has {n} sites, expected {n_sites}")
    if term.max_site >= n:
        raise IndexError(f"term acts on site {term.max_site} but state has {n} sites")
    out = psi.astype(np.complex128, copy=True)
    for site, axis in reversed(term.factors):
        view = _site_view(out, n, site)
        if axis is PauliAxis.Z:
            view[:, 1, :] *= -1
        else:
            out = np.ascontiguousarray(view[:, ::-1, :]).reshape(-1)
    return out


def apply_hamiltonian(state, spec: HamiltonianSpec, out: np.ndarray | None = None) -> np.ndarray:
    """Matrix-free ``H|psi>``.

    The ZZ part acts as a cached diagonal; each X term adds the amplitude of
    the index with that site's bit flipped. Cost is O(2**n * n) per call.
    """
    psi = _as_amplitudes(state)
    n = spec.n_sites
    if psi.shape[0] != spec.dim:
        raise ValueError(f"state dimension {psi.shape[0]} != 2**{n}")
    if out is None:
        out = np.empty(spec.dim, dtype=np.complex128)
    np.multiply(zz_diagonal(spec), psi, out=out)
    h = float(spec.field_h)
    if h != 0.0:
        for site in range(n):
            src = _site_view(psi, n, site)
            dst = _site_view(out, n, site)
            dst[:, 0, :] -= h * src[:, 1, :]
            dst[:, 1, :] -= h * src[:, 0, :]
    return out
