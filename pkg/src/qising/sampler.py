"""Field sweeps over random states and the on-disk dataset formats.

A sweep draws ``samples_per_h`` random states for every field value, each
from its own :class:`~qising.states.RngStream`, and records energy,
magnetization, half-split entropy and per-site ``<Z_i>``. Pair correlators
``<Z_i Z_j>`` are accumulated while the state is still in memory since they
cannot be rebuilt from the per-site columns.

Work is split into fixed-size chunks that never straddle two field values;
the chunk layout does not depend on the thread count, so output is
bit-identical for any number of workers.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .entanglement import half_split_entropies
from .lattice import METRICS, LatticeSpec, build_lattice, distances, pairs_at_distance
from .operators import HamiltonianSpec
from .states import (
    STATE_MODES,
    RngStream,
    draw_amplitudes,
    energy_from_moments,
    make_stream_id,
    probabilities,
    x_expectations_batch,
    z_moments,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
BOND_MODES = ("honored", "dedup")
CHUNK_SIZE = 32
BASE_COLUMNS = ("h", "sample_index", "stream_id", "energy", "magnetization", "entropy")
CORRELATION_COLUMNS = ("n_spins", "h", "distance", "connected_mean", "raw_mean", "count")


class DatasetFormatError(ValueError):
    """A dataset, correlation or manifest file is malformed."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def h_grid(h_min: float = 1.0, h_max: float = 5.0, h_step: float = 0.25) -> tuple[float, ...]:
    """Uniform grid from ``h_min`` to ``h_max`` inclusive."""
    if h_step <= 0:
        raise ValueError("h_step must be positive")
    if h_max < h_min:
        raise ValueError("h_max must be >= h_min")
    n = int(math.floor((h_max - h_min) / h_step + 1e-9)) + 1
    return tuple(round(h_min + k * h_step, 12) for k in range(n))


@dataclass(frozen=True)
class SweepConfig:
    lattice: LatticeSpec
    master_seed: int
    coupling_J: float = 1.0
    h_values: tuple[float, ...] = field(default_factory=h_grid)
    samples_per_h: int = 5000
    bond_multiplicity_mode: str = "honored"
    state_mode: str = "haar"
    record_correlators: bool = True
    distance_metric: str = "linear"

    def __post_init__(self):
        hv = tuple(float(h) for h in self.h_values)
        object.__setattr__(self, "h_values", hv)
        if not hv:
            raise ValueError("h_values must be non-empty")
        if any(b <= a for a, b in zip(hv, hv[1:])):
            raise ValueError("h_values must be strictly ascending")
        if int(self.samples_per_h) < 1:
            raise ValueError("samples_per_h must be >= 1")
        if self.bond_multiplicity_mode not in BOND_MODES:
            raise ValueError(f"bond mode must be one of {BOND_MODES}")
        if self.state_mode not in STATE_MODES:
            raise ValueError(f"state mode must be one of {STATE_MODES}")
        if self.distance_metric not in METRICS:
            raise ValueError(f"distance metric must be one of {METRICS}")
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        if self.lattice.n_sites % 2:
            raise ValueError("half-split entropy needs an even number of sites")

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def hamiltonian(self, h: float) -> HamiltonianSpec:
        return HamiltonianSpec(
            self.lattice, self.coupling_J, h, dedup_bonds=self.bond_multiplicity_mode == "dedup"
        )


@dataclass(frozen=True)
class SampleRecord:
    h: float
    sample_index: int
    stream_id: int
    energy: float
    magnetization: float
    entropy: float
    site_z: tuple[float, ...]


@dataclass(eq=False)
class Dataset:
    """Column-oriented collection of sample records."""

    n_sites: int
    h: np.ndarray
    sample_index: np.ndarray
    stream_id: np.ndarray
    energy: np.ndarray
    magnetization: np.ndarray
    entropy: np.ndarray
    site_z: np.ndarray

    def __len__(self):
        return len(self.h)

    def __eq__(self, other):
        if not isinstance(other, Dataset) or self.n_sites != other.n_sites:
            return NotImplemented if not isinstance(other, Dataset) else False
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name))
            for f in fields(self)
            if f.name != "n_sites"
        )

    @classmethod
    def empty(cls, n_sites: int) -> "Dataset":
        z = np.zeros(0)
        i = np.zeros(0, dtype=np.int64)
        return cls(n_sites, z, i, i.copy(), z.copy(), z.copy(), z.copy(), np.zeros((0, n_sites)))

    @classmethod
    def from_records(cls, records, n_sites: int) -> "Dataset":
        records = list(records)
        if not records:
            return cls.empty(n_sites)
        col = lambda name, dt=np.float64: np.array([getattr(r, name) for r in records], dtype=dt)
        return cls(
            n_sites,
            col("h"),
            col("sample_index", np.int64),
            col("stream_id", np.int64),
            col("energy"),
            col("magnetization"),
            col("entropy"),
            np.array([r.site_z for r in records], dtype=np.float64).reshape(len(records), n_sites),
        )

    def records(self):
        for k in range(len(self)):
            yield SampleRecord(
                float(self.h[k]),
                int(self.sample_index[k]),
                int(self.stream_id[k]),
                float(self.energy[k]),
                float(self.magnetization[k]),
                float(self.entropy[k]),
                tuple(float(v) for v in self.site_z[k]),
            )

    def h_values(self) -> np.ndarray:
        return np.unique(self.h)

    def column(self, quantity: str) -> np.ndarray:
        if quantity not in ("energy", "magnetization", "entropy"):
            raise KeyError(quantity)
        return getattr(self, quantity)


@dataclass(eq=False)
class CorrelatorAccumulator:
    """Per-(h, distance) sums of per-state pair correlators.

    For each state, ``C(d)`` is the mean over pairs at distance ``d`` of the
    connected correlator ``<Z_i Z_j> - <Z_i><Z_j>``; ``R(d)`` is the same
    mean of the raw ``<Z_i Z_j>``. Sums of squares are kept for standard
    errors; they are NaN when the accumulator was loaded from a file.
    """

    n_sites: int
    h_values: np.ndarray
    distances: np.ndarray
    connected_sum: np.ndarray
    connected_sumsq: np.ndarray
    raw_sum: np.ndarray
    raw_sumsq: np.ndarray
    count: np.ndarray
    expected_count: int | None = None

    @classmethod
    def zeros(cls, n_sites, h_values, dists, expected_count=None) -> "CorrelatorAccumulator":
        shape = (len(h_values), len(dists))
        return cls(
            n_sites,
            np.asarray(h_values, dtype=np.float64),
            np.asarray(dists, dtype=np.int64),
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape, dtype=np.int64),
            expected_count,
        )

    def add(self, h_index: int, connected: np.ndarray, raw: np.ndarray) -> None:
        """Add a batch of per-state correlators, shape (batch, n_distances), in order."""
        for c, r in zip(connected, raw):
            self.connected_sum[h_index] += c
            self.connected_sumsq[h_index] += c * c
            self.raw_sum[h_index] += r
            self.raw_sumsq[h_index] += r * r
            self.count[h_index] += 1

    def is_complete(self) -> bool:
        if self.count.size == 0 or np.any(self.count == 0):
            return False
        if self.expected_count is not None:
            return bool(np.all(self.count == self.expected_count))
        return bool(np.all(self.count == self.count[0, 0]))

    def connected_mean(self) -> np.ndarray:
        return self.connected_sum / self.count

    def raw_mean(self) -> np.ndarray:
        return self.raw_sum / self.count

    def connected_var(self) -> np.ndarray:
        """Unbiased per-cell sample variance of the per-state connected correlator."""
        n = self.count
        mean = self.connected_sum / n
        return np.maximum(self.connected_sumsq - n * mean * mean, 0.0) / (n - 1)


def distance_pairs(lattice: LatticeSpec, metric: str):
    dists = distances(lattice, metric)
    idx = []
    for d in dists:
        pairs = pairs_at_distance(lattice, d, metric).pairs
        idx.append((np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])))
    return dists, idx


def pair_correlators(z: np.ndarray, zz: np.ndarray, pair_index):
    """Per-state connected and raw correlators averaged over the pairs at each distance.

    ``pair_index`` holds one ``(i_sites, j_sites)`` array pair per distance.
    Returns two arrays of shape (batch, n_distances).
    """
    connected = np.empty((z.shape[0], len(pair_index)))
    raw = np.empty_like(connected)
    for k, (ii, jj) in enumerate(pair_index):
        pair_zz = zz[:, ii, jj]
        raw[:, k] = pair_zz.mean(axis=1)
        connected[:, k] = (pair_zz - z[:, ii] * z[:, jj]).mean(axis=1)
    return connected, raw


def sample_observables(amps: np.ndarray, spec: HamiltonianSpec):
    """Observables of a batch of states, shape (batch, 2**n).

    Returns ``(energy, site_z, entropy, zz)``. Energy is assembled from the
    ``<Z_i Z_j>`` and ``<X_i>`` expectations, all computed with bitwise
    kernels in O(2**n * n) per state.
    """
    n = spec.n_sites
    z, zz = z_moments(probabilities(amps), n)
    x = x_expectations_batch(amps, n)
    energy = energy_from_moments(spec, zz, x)
    entropy = half_split_entropies(amps, n)
    return energy, z, entropy, zz


def _chunks(config: SweepConfig):
    for hi in range(len(config.h_values)):
        for start in range(0, config.samples_per_h, CHUNK_SIZE):
            yield hi, start, min(start + CHUNK_SIZE, config.samples_per_h)


def _run_chunk(config: SweepConfig, pair_index, chunk):
    hi, start, stop = chunk
    n = config.n_sites
    spec = config.hamiltonian(config.h_values[hi])
    stream_ids = [make_stream_id(hi, s) for s in range(start, stop)]
    amps = np.empty((len(stream_ids), 1 << n), dtype=np.complex128)
    for row, sid in zip(amps, stream_ids):
        draw_amplitudes(n, RngStream(config.master_seed, sid), config.state_mode, out=row)
    energy, z, entropy, zz = sample_observables(amps, spec)
    corr = pair_correlators(z, zz, pair_index) if config.record_correlators else None
    return chunk, np.array(stream_ids, dtype=np.int64), energy, z, entropy, corr


def run_sweep(config: SweepConfig, threads: int | None = 1):
    """Run the full sweep; returns ``(Dataset, CorrelatorAccumulator | None)``.

    Records come out in (h-index, sample-index) order for any ``threads``.
    BLAS is pinned to one thread per worker so reductions are deterministic.
    """
    threads = max(1, int(threads or os.cpu_count() or 1))
    n = config.n_sites
    total = len(config.h_values) * config.samples_per_h
    dists, pair_index = distance_pairs(config.lattice, config.distance_metric)
    acc = None
    if config.record_correlators:
        acc = CorrelatorAccumulator.zeros(n, config.h_values, dists, config.samples_per_h)

    h_col = np.empty(total)
    sample_col = np.empty(total, dtype=np.int64)
    stream_col = np.empty(total, dtype=np.int64)
    energy_col = np.empty(total)
    mag_col = np.empty(total)
    ent_col = np.empty(total)
    z_col = np.empty((total, n))

    chunks = list(_chunks(config))
    work = lambda c: _run_chunk(config, pair_index, c)
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        if threads == 1:
            results = map(work, chunks)
            executor = None
        else:
            executor = ThreadPoolExecutor(max_workers=threads)
            results = executor.map(work, chunks)
        try:
            for (hi, start, stop), sids, energy, z, entropy, corr in results:
                lo = hi * config.samples_per_h + start
                sl = slice(lo, lo + (stop - start))
                h_col[sl] = config.h_values[hi]
                sample_col[sl] = np.arange(start, stop)
                stream_col[sl] = sids
                energy_col[sl] = energy
                z_col[sl] = z
                mag_col[sl] = z.mean(axis=1)
                ent_col[sl] = entropy
                if acc is not None:
                    acc.add(hi, *corr)
        finally:
            if executor is not None:
                executor.shutdown()
    log.info("sweep of %d samples on %d sites took %.1fs", total, n, time.perf_counter() - t0)
    dataset = Dataset(n, h_col, sample_col, stream_col, energy_col, mag_col, ent_col, z_col)
    return dataset, acc


def recompute_record(config: SweepConfig, h_index: int, sample_index: int) -> SampleRecord:
    """Re-derive one record from its stream, using the same kernels as the sweep."""
    n = config.n_sites
    sid = make_stream_id(h_index, sample_index)
    amps = draw_amplitudes(n, RngStream(config.master_seed, sid), config.state_mode)[None, :]
    h = config.h_values[h_index]
    energy, z, entropy, _ = sample_observables(amps, config.hamiltonian(h))
    return SampleRecord(
        h, sample_index, sid, float(energy[0]), float(z.mean(axis=1)[0]), float(entropy[0]),
        tuple(float(v) for v in z[0]),
    )


# ---------------------------------------------------------------- file formats


def dataset_header(n_sites: int) -> list[str]:
    return list(BASE_COLUMNS) + [f"z_{i}" for i in range(n_sites)]


def write_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(dataset_header(dataset.n_sites)) + "\n")
        for k in range(len(dataset)):
            row = [
                fmt(dataset.h[k]),
                str(int(dataset.sample_index[k])),
                str(int(dataset.stream_id[k])),
                fmt(dataset.energy[k]),
                fmt(dataset.magnetization[k]),
                fmt(dataset.entropy[k]),
            ]
            row.extend(fmt(v) for v in dataset.site_z[k])
            f.write(",".join(row) + "\n")
    os.replace(tmp, path)


def _parse(cell: str, kind, lineno: int, column: str):
    try:
        return kind(cell)
    except ValueError:
        raise DatasetFormatError(f"line {lineno}: non-numeric value {cell!r} in column {column}") from None


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"line 1: {path} is empty, expected a header") from None
        n_z = len(header) - len(BASE_COLUMNS)
        if n_z < 1 or header != dataset_header(n_z):
            raise DatasetFormatError(f"line 1: unexpected header {','.join(header)!r}")
        kinds = [float, int, int, float, float, float] + [float] * n_z
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"line {lineno}: expected {len(header)} columns, found {len(row)}"
                )
            rows.append([_parse(c, k, lineno, name) for c, k, name in zip(row, kinds, header)])
    if not rows:
        return Dataset.empty(n_z)
    ints = np.array([r[1:3] for r in rows], dtype=np.int64)
    floats = np.array([[r[0]] + r[3:] for r in rows], dtype=np.float64)
    return Dataset(
        n_z,
        floats[:, 0].copy(),
        ints[:, 0].copy(),
        ints[:, 1].copy(),
        floats[:, 1].copy(),
        floats[:, 2].copy(),
        floats[:, 3].copy(),
        floats[:, 4:].copy(),
    )


def write_correlations(acc: CorrelatorAccumulator, path) -> None:
    cm, rm = acc.connected_mean(), acc.raw_mean()
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(CORRELATION_COLUMNS) + "\n")
        for hi, h in enumerate(acc.h_values):
            for di, d in enumerate(acc.distances):
                f.write(
                    f"{acc.n_sites},{fmt(h)},{int(d)},{fmt(cm[hi, di])},{fmt(rm[hi, di])},"
                    f"{int(acc.count[hi, di])}\n"
                )


def read_correlations(path) -> CorrelatorAccumulator:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(CORRELATION_COLUMNS):
            raise DatasetFormatError(f"line 1: unexpected correlation header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CORRELATION_COLUMNS):
                raise DatasetFormatError(
                    f"line {lineno}: expected {len(CORRELATION_COLUMNS)} columns, found {len(row)}"
                )
            kinds = (int, float, int, float, float, int)
            rows.append(tuple(_parse(c, k, lineno, nm) for c, k, nm in zip(row, kinds, header)))
    if not rows:
        raise DatasetFormatError(f"{path}: correlation file has no rows")
    n_sites = rows[0][0]
    hs = sorted({r[1] for r in rows})
    ds = sorted({r[2] for r in rows})
    acc = CorrelatorAccumulator.zeros(n_sites, hs, ds)
    acc.connected_sumsq[:] = np.nan
    acc.raw_sumsq[:] = np.nan
    h_pos = {h: k for k, h in enumerate(hs)}
    d_pos = {d: k for k, d in enumerate(ds)}
    for n, h, d, cmean, rmean, count in rows:
        if n != n_sites:
            raise DatasetFormatError(f"{path}: mixed system sizes {n_sites} and {n}")
        hi, di = h_pos[h], d_pos[d]
        acc.connected_sum[hi, di] = cmean * count
        acc.raw_sum[hi, di] = rmean * count
        acc.count[hi, di] = count
    return acc


def write_manifest(config: SweepConfig, summary: dict, path) -> None:
    """Plain-text ``key=value`` run manifest."""
    items = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "rows": config.lattice.rows,
        "cols": config.lattice.cols,
        "n_sites": config.n_sites,
        "J": fmt(config.coupling_J),
        "h_values": ";".join(fmt(h) for h in config.h_values),
        "samples": config.samples_per_h,
        "seed": config.master_seed,
        "bond_mode": config.bond_multiplicity_mode,
        "state_mode": config.state_mode,
        "record_correlators": str(config.record_correlators).lower(),
        "distance_metric": config.distance_metric,
    }
    for k, v in summary.items():
        items[k] = fmt(v) if isinstance(v, float) else v
    with open(path, "w", encoding="utf-8", newline="") as f:
        for k, v in items.items():
            f.write(f"{k}={v}\n")


def read_manifest(path) -> tuple[SweepConfig, dict]:
    """Parse a manifest; returns the config and all raw key/value pairs."""
    items = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "=" not in line:
                raise DatasetFormatError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            items[key.strip()] = value.strip()
    try:
        config = SweepConfig(
            lattice=build_lattice(int(items["rows"]), int(items["cols"])),
            master_seed=int(items["seed"]),
            coupling_J=float(items["J"]),
            h_values=tuple(float(h) for h in items["h_values"].split(";")),
            samples_per_h=int(items["samples"]),
            bond_multiplicity_mode=items["bond_mode"],
            state_mode=items["state_mode"],
            record_correlators=items["record_correlators"] == "true",
            distance_metric=items.get("distance_metric", "linear"),
        )
    except KeyError as e:
        raise DatasetFormatError(f"{path}: manifest is missing key {e.args[0]!r}") from None
    return config, items
