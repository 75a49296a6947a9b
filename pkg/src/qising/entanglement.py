"""Bipartite entanglement of pure states through the Schmidt spectrum."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import _n_sites_of

EIGEN_CLAMP = 1e-12
NORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Eigenvalues of the reduced density matrix, descending."""

    values: np.ndarray

    def __len__(self):
        return len(self.values)


def _reshape_split(psi: np.ndarray, split_site: int) -> np.ndarray:
    n = _n_sites_of(psi)
    if not 1 <= split_site <= n - 1:
        raise ValueError(f"split site must lie in [1, {n - 1}], got {split_site}")
    # Site 0 is the most significant bit, so subsystem A = sites [0, split)
    # is the row index of a C-order reshape.
    return psi.reshape(1 << split_site, 1 << (n - split_site))


def schmidt_spectrum(state, split_site: int) -> SchmidtSpectrum:
    """Spectrum of ``rho_A = Tr_B |psi><psi|`` for A = sites ``[0, split_site)``.

    Computed as squared singular values of the reshaped amplitude matrix;
    neither ``rho`` nor ``rho_A`` is formed.
    """
    psi = np.asarray(state, dtype=np.complex128)
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
    sv = np.linalg.svd(_reshape_split(psi, split_site), compute_uv=False)
    return SchmidtSpectrum(np.clip(sv ** 2, 0.0, 1.0))


def _entropy(lam: np.ndarray) -> np.ndarray:
    lam = np.where(lam < EIGEN_CLAMP, 0.0, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0.0, lam * np.log(np.where(lam > 0.0, lam, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def von_neumann_entropy(spectrum: SchmidtSpectrum | np.ndarray, base: float | None = None) -> float:
    """``-sum lam ln lam`` in nats, or in ``base`` units (e.g. ``base=2`` for bits)."""
    lam = np.asarray(getattr(spectrum, "values", spectrum), dtype=np.float64)
    s = float(_entropy(lam))
    if base is not None:
        s /= math.log(base)
    return s


def half_split_entropy(state) -> float:
    psi = np.asarray(state)
    n = _n_sites_of(psi)
    if n % 2:
        raise ValueError(f"half-split entropy needs an even number of sites, got {n}")
    return von_neumann_entropy(schmidt_spectrum(psi, n // 2))


def half_split_entropies(amps: np.ndarray, n_sites: int) -> np.ndarray:
    """Batched :func:`half_split_entropy` for ``amps`` of shape (batch, 2**n)."""
    if n_sites % 2:
        raise ValueError(f"half-split entropy needs an even number of sites, got {n_sites}")
    half = 1 << (n_sites // 2)
    sv = np.linalg.svd(amps.reshape(amps.shape[0], half, half), compute_uv=False)
    return _entropy(np.clip(sv ** 2, 0.0, 1.0))


def page_mean_entropy(d_a: int, d_b: int, exact: bool = False) -> float:
    """Mean entanglement entropy (nats) of Haar states on ``C^d_a (x) C^d_b``.

    ``exact=False`` is the large-dimension form ``ln d_a - d_a / (2 d_b)``;
    ``exact=True`` sums the finite harmonic series.
    """
    m, n = sorted((d_a, d_b))
    if not exact:
        return math.log(m) - m / (2 * n)
    return math.fsum(1.0 / k for k in range(n + 1, m * n + 1)) - (m - 1) / (2 * n)
