"""Summary statistics, correlation tables, field derivatives and histograms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sampler import CorrelatorAccumulator, Dataset, fmt

QUANTITIES = ("energy", "magnetization", "entropy")
DEFAULT_BINS = 50
SPACING_TOL = 1e-9


class AnalysisError(ValueError):
    pass


class RunningStats:
    """One-pass mean/variance (Welford, with Chan's merge for array batches)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.min = math.inf
        self.max = -math.inf

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        self.min = min(self.min, x)
        self.max = max(self.max, x)

    def push_many(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            return
        n_b = values.size
        mean_b = float(values.mean())
        m2_b = float(((values - mean_b) ** 2).sum())
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * self.count * n_b / n
        self.count = n
        self.min = min(self.min, float(values.min()))
        self.max = max(self.max, float(values.max()))

    @property
    def variance(self) -> float:
        """Unbiased variance; 0.0 for fewer than two values."""
        if self.count < 2:
            return 0.0
        return max(self.m2, 0.0) / (self.count - 1)


@dataclass(frozen=True)
class SummaryRow:
    h: float
    quantity: str
    mean: float
    variance: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class SummaryTable:
    n_sites: int
    rows: tuple[SummaryRow, ...]

    def get(self, h: float, quantity: str) -> SummaryRow:
        for r in self.rows:
            if r.h == h and r.quantity == quantity:
                return r
        raise KeyError((h, quantity))

    def series(self, quantity: str, stat: str = "mean"):
        """``(h, value)`` pairs for one quantity, ascending in h."""
        return [(r.h, getattr(r, stat)) for r in self.rows if r.quantity == quantity]


def _groups(dataset: Dataset):
    order = np.argsort(dataset.h, kind="stable")
    hs, starts = np.unique(dataset.h[order], return_index=True)
    bounds = list(starts) + [len(order)]
    for k, h in enumerate(hs):
        yield float(h), order[bounds[k]:bounds[k + 1]]


def summarize(dataset: Dataset, chunk: int = 4096) -> SummaryTable:
    if len(dataset) == 0:
        raise AnalysisError("empty dataset")
    rows = []
    for h, idx in _groups(dataset):
        for q in QUANTITIES:
            stats = RunningStats()
            values = dataset.column(q)[idx]
            for lo in range(0, len(values), chunk):
                stats.push_many(values[lo:lo + chunk])
            rows.append(SummaryRow(h, q, stats.mean, stats.variance, stats.min, stats.max, stats.count))
    return SummaryTable(dataset.n_sites, tuple(rows))


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    n_sites: int
    distances: np.ndarray
    connected: np.ndarray
    raw: np.ndarray
    connected_stderr: np.ndarray
    h_values: np.ndarray
    connected_by_h: np.ndarray
    raw_by_h: np.ndarray
    count_by_h: np.ndarray


def correlation_table(acc: CorrelatorAccumulator) -> CorrelationTable:
    """Average per-state correlators uniformly over (pair, sample, h).

    Each per-state value is already a uniform mean over the pairs at one
    distance, so pooling sums over h keeps the weights uniform.
    """
    if not acc.is_complete():
        raise AnalysisError("incomplete correlator accumulator")
    total = acc.count.sum(axis=0)
    connected = acc.connected_sum.sum(axis=0) / total
    raw = acc.raw_sum.sum(axis=0) / total
    # Standard error of the pooled mean, from per-h sample variances.
    var = acc.connected_var()
    stderr = np.sqrt((var * acc.count).sum(axis=0)) / total
    return CorrelationTable(
        acc.n_sites,
        acc.distances.copy(),
        connected,
        raw,
        stderr,
        acc.h_values.copy(),
        acc.connected_mean(),
        acc.raw_mean(),
        acc.count.copy(),
    )


@dataclass(frozen=True, eq=False)
class DerivativeSeries:
    order: int
    h: np.ndarray
    values: np.ndarray
    step: float
    schemes: tuple[str, ...]

    @property
    def points(self):
        return list(zip(self.h.tolist(), self.values.tolist()))


def _uniform_step(h: np.ndarray) -> float:
    if len(h) < 3:
        raise AnalysisError(f"need at least 3 points for a derivative, got {len(h)}")
    diffs = np.diff(h)
    if np.any(diffs <= 0):
        raise AnalysisError("h values must be strictly ascending")
    step = float((h[-1] - h[0]) / (len(h) - 1))
    if np.max(np.abs(diffs - step)) > SPACING_TOL:
        raise AnalysisError("non-uniform h grid; finite differences need uniform spacing")
    return step


def _stencil(f: np.ndarray, step: float, order: int):
    """Finite differences along axis 0 of ``f``; returns (values, schemes)."""
    out = np.empty_like(f, dtype=np.float64)
    n = f.shape[0]
    if order == 1:
        out[1:-1] = (f[2:] - f[:-2]) / (2 * step)
        # Second-order one-sided stencils match the central scheme's accuracy.
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * step)
        out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * step)
        schemes = ("forward",) + ("central",) * (n - 2) + ("backward",)
    elif order == 2:
        out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (step * step)
        out[0] = out[1]
        out[-1] = out[-2]
        schemes = ("copied",) + ("central",) * (n - 2) + ("copied",)
    else:
        raise AnalysisError(f"derivative order must be 1 or 2, got {order}")
    return out, schemes


def finite_difference(series, order: int) -> DerivativeSeries:
    """Derivative of a ``[(h, value), ...]`` series on a uniform grid.

    Order 2 copies the nearest interior value to both endpoints; those points
    are marked ``"copied"`` in ``schemes``.
    """
    pts = list(series)
    h = np.array([p[0] for p in pts], dtype=np.float64)
    f = np.array([p[1] for p in pts], dtype=np.float64)
    step = _uniform_step(h)
    values, schemes = _stencil(f, step, order)
    return DerivativeSeries(order, h, values, step, schemes)


@dataclass(frozen=True, eq=False)
class PerSampleDerivatives:
    """Derivative tracks, one per sample index; ``values`` has shape (n_h, n_samples)."""

    order: int
    h: np.ndarray
    sample_index: np.ndarray
    values: np.ndarray
    step: float
    schemes: tuple[str, ...]

    def at(self, k: int) -> DerivativeSeries:
        return DerivativeSeries(self.order, self.h, self.values[:, k], self.step, self.schemes)

    def mean_series(self) -> DerivativeSeries:
        return DerivativeSeries(self.order, self.h, self.values.mean(axis=1), self.step, self.schemes)


def paired_sample_derivative(dataset: Dataset, order: int, quantity: str = "energy") -> PerSampleDerivatives:
    """Apply the stencils to each sample-index track across h.

    Samples at different h are independent draws, so pairing by
    ``sample_index`` is a bookkeeping convention, not a physical trajectory.
    """
    groups = list(_groups(dataset))
    if not groups:
        raise AnalysisError("empty dataset")
    h = np.array([g[0] for g in groups])
    step = _uniform_step(h)
    col = dataset.column(quantity)
    first = None
    tracks = []
    for hv, idx in groups:
        idx = idx[np.argsort(dataset.sample_index[idx], kind="stable")]
        samples = dataset.sample_index[idx]
        if first is None:
            first = samples
        elif len(samples) != len(first) or not np.array_equal(samples, first):
            raise AnalysisError(f"ragged sample counts: h={hv} has {len(samples)} samples, expected {len(first)}")
        tracks.append(col[idx])
    values, schemes = _stencil(np.array(tracks), step, order)
    return PerSampleDerivatives(order, h, first.copy(), values, step, schemes)


@dataclass(frozen=True, eq=False)
class Histogram:
    quantity: str
    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0


def histogram(values, bin_count: int = DEFAULT_BINS, quantity: str = "") -> Histogram:
    """Uniform bins over ``[min, max]``; the maximum lands in the last bin."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise AnalysisError("cannot histogram an empty sample")
    if bin_count < 1:
        raise AnalysisError("bin_count must be >= 1")
    counts, edges = np.histogram(values, bins=bin_count)
    return Histogram(quantity, edges, counts)


def energy_variance_vs_n(datasets) -> list[tuple[int, float, float]]:
    """``(n_spins, mean per-h variance, pooled variance)`` for each dataset, by size."""
    rows = []
    for ds in datasets:
        table = summarize(ds)
        per_h = [v for _, v in table.series("energy", "variance")]
        pooled = float(np.var(ds.energy, ddof=1)) if len(ds) > 1 else 0.0
        rows.append((ds.n_sites, float(np.mean(per_h)), pooled))
    return sorted(rows)


# ------------------------------------------------------------------ file output


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")
    return path


def write_summary(table: SummaryTable, path) -> Path:
    return write_csv(
        path,
        ("h", "quantity", "mean", "variance", "min", "max", "count"),
        ((r.h, r.quantity, r.mean, r.variance, r.min, r.max, r.count) for r in table.rows),
    )


def write_histogram(hist: Histogram, path) -> Path:
    return write_csv(
        path,
        ("bin_left", "bin_right", "count"),
        zip(hist.edges[:-1], hist.edges[1:], (int(c) for c in hist.counts)),
    )


def write_derivative(series: DerivativeSeries, path) -> Path:
    return write_csv(
        path,
        ("h", "value", "scheme", "step"),
        ((h, v, s, series.step) for h, v, s in zip(series.h, series.values, series.schemes)),
    )


def write_per_sample_derivative(per: PerSampleDerivatives, path) -> Path:
    rows = (
        (per.h[i], int(per.sample_index[k]), per.values[i, k], per.schemes[i])
        for i in range(len(per.h))
        for k in range(len(per.sample_index))
    )
    return write_csv(path, ("h", "sample_index", "value", "scheme"), rows)


def write_correlation_table(table: CorrelationTable, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    main = write_csv(
        out_dir / "correlation_vs_distance.csv",
        ("n_spins", "distance", "connected", "raw", "connected_stderr"),
        (
            (table.n_sites, int(d), c, r, se)
            for d, c, r, se in zip(table.distances, table.connected, table.raw, table.connected_stderr)
        ),
    )
    by_h = write_csv(
        out_dir / "correlation_by_h.csv",
        ("n_spins", "h", "distance", "connected", "raw", "count"),
        (
            (table.n_sites, h, int(d), table.connected_by_h[i, k], table.raw_by_h[i, k], int(table.count_by_h[i, k]))
            for i, h in enumerate(table.h_values)
            for k, d in enumerate(table.distances)
        ),
    )
    return [main, by_h]


_DERIV_NAMES = {1: "dEdH", 2: "d2EdH2"}


def emit_plot_data(dataset: Dataset, out_dir, accumulator: CorrelatorAccumulator | None = None,
                   bins: int = DEFAULT_BINS) -> list[Path]:
    """Write one CSV per figure family into ``out_dir``; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = summarize(dataset)
    written = [write_summary(table, out_dir / "summary.csv")]
    for q, name in (("energy", "mean_energy_vs_h"), ("magnetization", "mean_magnetization_vs_h"),
                    ("entropy", "mean_entropy_vs_h")):
        rows = [(r.h, r.mean, r.variance, r.count) for r in table.rows if r.quantity == q]
        written.append(write_csv(out_dir / f"{name}.csv", ("h", f"mean_{q}", "variance", "count"), rows))
    written.append(write_csv(
        out_dir / "energy_variance_vs_n.csv",
        ("n_spins", "energy_variance", "pooled_energy_variance"),
        energy_variance_vs_n([dataset]),
    ))
    for q in QUANTITIES:
        written.append(write_histogram(histogram(dataset.column(q), bins, q), out_dir / f"hist_{q}.csv"))
    if len(table.series("energy")) >= 3:
        for order, name in _DERIV_NAMES.items():
            written.append(write_derivative(finite_difference(table.series("energy"), order),
                                            out_dir / f"{name}_vs_h.csv"))
            per = paired_sample_derivative(dataset, order)
            written.append(write_histogram(histogram(per.values, bins, name), out_dir / f"hist_{name}.csv"))
    if accumulator is not None:
        written.extend(write_correlation_table(correlation_table(accumulator), out_dir))
    return written
