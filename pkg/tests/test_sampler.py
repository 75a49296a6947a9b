import numpy as np
import pytest

from qising.lattice import build_lattice
from qising.sampler import (
    CorrelatorAccumulator,
    Dataset,
    DatasetFormatError,
    SampleRecord,
    SweepConfig,
    h_grid,
    read_correlations,
    read_dataset,
    read_manifest,
    recompute_record,
    run_sweep,
    write_correlations,
    write_dataset,
    write_manifest,
)
from qising.states import split_stream_id


@pytest.fixture(scope="module")
def small_config():
    return SweepConfig(build_lattice(2, 2), master_seed=11, h_values=(1.0, 2.0), samples_per_h=3)


@pytest.fixture(scope="module")
def sweep_2x4():
    cfg = SweepConfig(build_lattice(2, 4), master_seed=5, h_values=h_grid(1.0, 2.0, 0.5), samples_per_h=70)
    return cfg, run_sweep(cfg)


def test_default_grid():
    grid = h_grid()
    assert len(grid) == 17 and grid[0] == 1.0 and grid[-1] == 5.0
    assert len(h_grid(1.0, 5.0, 0.05)) == 81


def test_config_validation():
    lat = build_lattice(2, 2)
    with pytest.raises(ValueError):
        SweepConfig(lat, 1, h_values=())
    with pytest.raises(ValueError):
        SweepConfig(lat, 1, h_values=(2.0, 1.0))
    with pytest.raises(ValueError):
        SweepConfig(lat, 1, samples_per_h=0)
    with pytest.raises(ValueError):
        SweepConfig(lat, 1, state_mode="ground")
    with pytest.raises(ValueError):
        SweepConfig(build_lattice(1, 3), 1)


def test_record_count_and_order(small_config):
    ds, acc = run_sweep(small_config)
    assert len(ds) == 6
    assert ds.h.tolist() == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
    assert ds.sample_index.tolist() == [0, 1, 2, 0, 1, 2]
    assert [split_stream_id(s) for s in ds.stream_id] == [(h, s) for h in (0, 1) for s in range(3)]
    assert acc.is_complete() and np.all(acc.count == 3)


def test_thread_count_independence(sweep_2x4):
    cfg, (ds1, acc1) = sweep_2x4
    ds8, acc8 = run_sweep(cfg, threads=8)
    assert ds1 == ds8
    np.testing.assert_array_equal(acc1.connected_sum, acc8.connected_sum)
    np.testing.assert_array_equal(acc1.raw_sumsq, acc8.raw_sumsq)


def test_records_reproducible_from_stream(sweep_2x4):
    cfg, (ds, _) = sweep_2x4
    for k in (0, 69, 70, 139, 209):
        hi, si = split_stream_id(ds.stream_id[k])
        rec = recompute_record(cfg, hi, si)
        assert rec == list(ds.records())[k]


def test_record_invariants(sweep_2x4):
    _, (ds, _) = sweep_2x4
    n = ds.n_sites
    assert np.all(np.abs(ds.site_z) <= 1 + 1e-12)
    assert np.all(np.abs(ds.magnetization) <= 1 + 1e-12)
    assert np.all(ds.entropy >= -1e-12)
    assert np.all(ds.entropy <= n / 2 * np.log(2) + 1e-10)
    np.testing.assert_array_equal(ds.magnetization, ds.site_z.mean(axis=1))


def test_correlators_against_direct_evaluation(small_config):
    from qising.operators import PauliTerm
    from qising.states import RngStream, expectation_pauli, random_state

    ds, acc = run_sweep(small_config)
    n = 4
    for hi in range(2):
        conn, raw = np.zeros(3), np.zeros(3)
        for si in range(3):
            psi = random_state(n, RngStream(small_config.master_seed, int(ds.stream_id[hi * 3 + si])))
            z = [expectation_pauli(psi, PauliTerm.z(i)) for i in range(n)]
            for d in (1, 2, 3):
                pairs = [(i, i + d) for i in range(n - d)]
                zz = [expectation_pauli(psi, PauliTerm.zz(i, j)) for i, j in pairs]
                raw[d - 1] += np.mean(zz)
                conn[d - 1] += np.mean([v - z[i] * z[j] for v, (i, j) in zip(zz, pairs)])
        np.testing.assert_allclose(acc.connected_sum[hi], conn, atol=1e-12)
        np.testing.assert_allclose(acc.raw_sum[hi], raw, atol=1e-12)


def test_no_correlators(small_config):
    from dataclasses import replace

    ds, acc = run_sweep(replace(small_config, record_correlators=False))
    assert acc is None and len(ds) == 6


def test_manhattan_metric_distances():
    cfg = SweepConfig(build_lattice(4, 4), master_seed=2, h_values=(1.0,), samples_per_h=2,
                      distance_metric="manhattan")
    _, acc = run_sweep(cfg)
    assert acc.distances.tolist() == [1, 2, 3, 4]


def test_dedup_changes_energy_only(small_config):
    from dataclasses import replace

    a, _ = run_sweep(small_config)
    b, _ = run_sweep(replace(small_config, bond_multiplicity_mode="dedup"))
    np.testing.assert_array_equal(a.entropy, b.entropy)
    assert not np.array_equal(a.energy, b.energy)


def test_product_random_sweep_has_zero_entropy(small_config):
    from dataclasses import replace

    ds, acc = run_sweep(replace(small_config, state_mode="product-random"))
    assert np.all(np.abs(ds.entropy) < 1e-10)
    # Product states have vanishing connected correlators.
    np.testing.assert_allclose(acc.connected_sum, 0, atol=1e-12)


# ------------------------------------------------------------------ files


def test_dataset_round_trip(tmp_path, sweep_2x4):
    _, (ds, _) = sweep_2x4
    write_dataset(ds, tmp_path / "d.csv")
    back = read_dataset(tmp_path / "d.csv")
    assert back == ds
    assert list(back.records()) == list(ds.records())
    text = (tmp_path / "d.csv").read_bytes()
    assert b"\r" not in text
    assert text.startswith(b"h,sample_index,stream_id,energy,magnetization,entropy,z_0,")


def test_empty_dataset_round_trip(tmp_path):
    write_dataset(Dataset.empty(4), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "h,sample_index,stream_id,energy,magnetization,entropy,z_0,z_1,z_2,z_3\n"
    back = read_dataset(tmp_path / "e.csv")
    assert len(back) == 0 and back.n_sites == 4


def test_from_records_round_trip():
    recs = [SampleRecord(1.0, 0, 0, -0.5, 0.25, 0.1, (0.5, 0.0)),
            SampleRecord(1.5, 0, 1 << 32, 0.5, -0.25, 0.2, (0.0, -0.5))]
    ds = Dataset.from_records(recs, 2)
    assert list(ds.records()) == recs


@pytest.mark.parametrize("body, line, fragment", [
    ("1,0,0,0.1,0.2,0.3,0.1,0.2,0.3\n", 2, "columns"),
    ("1,0,0,0.1,0.2,0.3,0.1,0.2,0.3,0.4\n1,1,1,x,0.2,0.3,0.1,0.2,0.3,0.4\n", 3, "non-numeric"),
])
def test_malformed_rows_report_line(tmp_path, body, line, fragment):
    p = tmp_path / "bad.csv"
    p.write_text("h,sample_index,stream_id,energy,magnetization,entropy,z_0,z_1,z_2,z_3\n" + body)
    with pytest.raises(DatasetFormatError, match=f"line {line}.*{fragment}"):
        read_dataset(p)


def test_malformed_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("h,energy\n1,2\n")
    with pytest.raises(DatasetFormatError, match="line 1"):
        read_dataset(p)


def test_correlations_file(tmp_path, sweep_2x4):
    _, (_, acc) = sweep_2x4
    write_correlations(acc, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "n_spins,h,distance,connected_mean,raw_mean,count"
    assert len(lines) == 1 + 3 * 7
    back = read_correlations(tmp_path / "c.csv")
    np.testing.assert_allclose(back.connected_mean(), acc.connected_mean(), rtol=1e-15, atol=1e-18)
    np.testing.assert_array_equal(back.count, acc.count)
    assert back.is_complete()


def test_accumulator_completeness():
    acc = CorrelatorAccumulator.zeros(4, [1.0, 2.0], [1, 2, 3], expected_count=2)
    acc.add(0, np.ones((2, 3)), np.ones((2, 3)))
    assert not acc.is_complete()
    acc.add(1, np.ones((2, 3)), np.ones((2, 3)))
    assert acc.is_complete()


def test_manifest(tmp_path):
    cfg = SweepConfig(build_lattice(2, 2), master_seed=3)
    write_manifest(cfg, {"n_records": 85000, "duration_seconds": "1.234"}, tmp_path / "m.txt")
    text = (tmp_path / "m.txt").read_text()
    for line in ("rows=2", "cols=2", "J=1", "samples=5000", "seed=3"):
        assert line in text.splitlines()
    back, items = read_manifest(tmp_path / "m.txt")
    assert back == cfg
    assert float(items["J"]) == 1.0

    other = SweepConfig(build_lattice(2, 2), master_seed=4)
    write_manifest(other, {"n_records": 85000, "duration_seconds": "9.9"}, tmp_path / "m2.txt")
    a = (tmp_path / "m.txt").read_text().splitlines()
    b = (tmp_path / "m2.txt").read_text().splitlines()
    diff = {x.split("=")[0] for x, y in zip(a, b) if x != y}
    assert diff == {"seed", "duration_seconds"}


def test_manifest_missing_key(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("rows=2\ncols=2\n")
    with pytest.raises(DatasetFormatError, match="missing"):
        read_manifest(p)
