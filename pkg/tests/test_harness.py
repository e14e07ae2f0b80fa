import csv
import dataclasses
import json

import numpy as np
import pytest

from ssamp.harness import (
    ConvergenceResult,
    ExperimentConfig,
    PhaseCell,
    Table,
    build_operator,
    convergence_table,
    curve_table,
    derive_seed,
    emit,
    iters_to_target,
    phase_table,
    pt_curve,
    ratio_key,
    run_convergence,
    run_phase_grid,
    run_runtime,
    run_single_trial,
    runtime_table,
)


def _cell(m_over_n, k_over_m, successes, trials=10, skipped=False):
    return PhaseCell(
        m_over_n=m_over_n,
        k_over_m=k_over_m,
        m=int(100 * m_over_n),
        k=int(100 * m_over_n * k_over_m),
        trials=0 if skipped else trials,
        successes=successes,
        mean_iters=0.0,
        mean_seconds=0.0,
        skipped=skipped,
    )


# ---------------------------------------------------------------- seeds


def test_ratio_key_is_stable_and_distinct():
    assert ratio_key(0.5) == ratio_key(0.5)
    assert ratio_key(0.5) != ratio_key(0.1)
    assert ratio_key(0.1) != ratio_key(0.1 + 1e-12)


def test_derive_seed_deterministic_and_split():
    a = derive_seed(42, 1, 2, 3)
    assert a == derive_seed(42, 1, 2, 3)
    assert a != derive_seed(42, 1, 2, 4)
    assert a != derive_seed(43, 1, 2, 3)
    assert 0 <= a < 2**64
    purposes = {derive_seed(0, ratio_key(0.5), ratio_key(0.1), 0, p) for p in range(4)}
    assert len(purposes) == 4


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(solver="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(matrix="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(signal_model="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(n=1)
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(grid_m_over_n=())
    with pytest.raises(ValueError):
        ExperimentConfig(grid_m_over_n=(0.0, 0.5))
    with pytest.raises(ValueError):
        ExperimentConfig(grid_k_over_m=(1.2,))


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"n": 64, "bogus": 1})
    cfg = ExperimentConfig.from_dict({"n": 64, "grid_m_over_n": [0.5], "grid_k_over_m": [0.1]})
    assert cfg.n == 64
    assert cfg.grid_m_over_n == (0.5,)


def test_config_lists_become_tuples():
    cfg = ExperimentConfig(grid_m_over_n=[0.25, 0.5], grid_k_over_m=[0.1])
    assert isinstance(cfg.grid_m_over_n, tuple)
    assert hash(cfg) == hash(dataclasses.replace(cfg))


# ---------------------------------------------------------------- operators


def test_build_operator_dispatch():
    kinds = {
        "iid_gaussian": {},
        "subsampled_dct": {},
        "subsampled_wht": {},
        "quasi_toeplitz": {},
        "sparse_bernoulli": {"col_weight": 4},
    }
    for kind, extra in kinds.items():
        n = 64
        cfg = ExperimentConfig(matrix=kind, n=n, **extra)
        op = build_operator(cfg, 32, 7, 8)
        assert op.kind == kind
        assert (op.m, op.n) == (32, n)
        assert not op.sign_randomized
    cfg = ExperimentConfig(matrix="subsampled_dct", n=64, sign_randomize=True)
    op = build_operator(cfg, 32, 7, 8)
    assert op.kind == "subsampled_dct" and op.sign_randomized


def test_build_operator_band_default_and_override():
    cfg = ExperimentConfig(matrix="quasi_toeplitz", n=64)
    assert build_operator(cfg, 16, 0, 0).coeffs.shape == (64,)
    cfg = ExperimentConfig(matrix="quasi_toeplitz", n=64, band=16)
    assert build_operator(cfg, 16, 0, 0).coeffs.shape == (16,)


# ---------------------------------------------------------------- trials & grids


def test_single_trial_easy_cell_succeeds():
    cfg = ExperimentConfig(n=200, trials=1, max_iters=300)
    r = run_single_trial(cfg, 0.5, 0.1, 100, 10, 0)
    assert r.success
    assert r.nmse <= cfg.success_nmse
    assert 0 < r.iters <= 300
    assert r.seconds == 0.0  # timing off by default


def test_single_trial_hopeless_cell_fails():
    cfg = ExperimentConfig(n=256, trials=1, max_iters=300)
    r = run_single_trial(cfg, 0.05, 0.99, 13, 13, 0)
    assert not r.success


def test_single_trial_swallows_divergence():
    cfg = ExperimentConfig(
        solver="tvamp", n=200, lam=0.05, max_iters=2000, tol=0.0, trials=1
    )
    with np.errstate(all="ignore"):
        r = run_single_trial(cfg, 0.5, 0.1, 100, 10, 0)
    assert not r.success
    assert r.nmse == float("inf")
    assert r.iters == 2000


def test_phase_grid_deterministic_reproduction():
    cfg = ExperimentConfig(n=100, grid_m_over_n=(0.4,), grid_k_over_m=(0.1, 0.6), trials=2, max_iters=200)
    assert run_phase_grid(cfg) == run_phase_grid(cfg)


def test_phase_grid_cells_survive_grid_permutation():
    base = ExperimentConfig(n=100, grid_m_over_n=(0.4,), grid_k_over_m=(0.1,), trials=2, max_iters=200)
    wide = dataclasses.replace(base, grid_m_over_n=(0.8, 0.4), grid_k_over_m=(0.3, 0.1))
    lone = run_phase_grid(base)[0]
    cells = run_phase_grid(wide)
    twin = [c for c in cells if c.m_over_n == 0.4 and c.k_over_m == 0.1][0]
    assert twin == lone


def test_phase_grid_skips_infeasible_cells():
    cfg = ExperimentConfig(n=4, grid_m_over_n=(0.1, 1.0), grid_k_over_m=(1.0,), trials=1)
    cells = run_phase_grid(cfg)
    # m = round(0.4) = 0 -> skipped; m=4, k=4 > n-1 -> skipped
    assert [c.skipped for c in cells] == [True, True]
    assert all(c.trials == 0 and c.success_rate == 0.0 for c in cells)


def test_phase_grid_rounding_of_m_and_k():
    cfg = ExperimentConfig(n=250, grid_m_over_n=(0.3,), grid_k_over_m=(0.26,), trials=1, max_iters=50)
    cell = run_phase_grid(cfg)[0]
    assert cell.m == 75  # round(0.3 * 250)
    assert cell.k == 20  # round(0.26 * 75)
    assert cell.trials == 1


# ---------------------------------------------------------------- pt_curve


def test_pt_curve_midpoint_interpolation():
    cells = [_cell(0.5, 0.1, 10), _cell(0.5, 0.2, 0)]
    assert pt_curve(cells) == [(0.5, pytest.approx(0.15))]


def test_pt_curve_exact_half_uses_lower_row():
    cells = [_cell(0.5, 0.1, 5), _cell(0.5, 0.2, 0)]
    assert pt_curve(cells) == [(0.5, pytest.approx(0.1))]


def test_pt_curve_omits_columns_without_crossing():
    cells = [
        _cell(0.3, 0.1, 10), _cell(0.3, 0.2, 10),     # all success
        _cell(0.6, 0.1, 0), _cell(0.6, 0.2, 0),       # all failure
        _cell(0.9, 0.1, 10), _cell(0.9, 0.2, 4),      # crosses
    ]
    curve = pt_curve(cells)
    assert [p[0] for p in curve] == [0.9]


def test_pt_curve_interpolates_within_bracketing_rows():
    rng = np.random.default_rng(0)
    ks = np.linspace(0.05, 0.95, 8)
    rates = np.clip(np.linspace(1.0, 0.0, 8) + rng.normal(0, 0.03, 8), 0, 1)
    cells = [_cell(0.5, float(k), int(round(r * 10))) for k, r in zip(ks, rates)]
    curve = pt_curve(cells)
    assert len(curve) == 1
    m_over_n, k_star = curve[0]
    assert ks[0] <= k_star <= ks[-1]


def test_pt_curve_ignores_skipped_cells():
    cells = [
        _cell(0.5, 0.1, 10),
        _cell(0.5, 0.15, 0, skipped=True),
        _cell(0.5, 0.2, 0),
    ]
    # the skipped row must not participate in bracketing
    curve = pt_curve(cells)
    assert curve == [(0.5, pytest.approx(0.15))]


def test_pt_curve_example_from_first_grid_scan():
    # non-monotone rates: the first bracketing pair from below wins
    cells = [
        _cell(0.5, 0.1, 8),
        _cell(0.5, 0.2, 2),
        _cell(0.5, 0.3, 6),
        _cell(0.5, 0.4, 0),
    ]
    curve = pt_curve(cells)
    assert curve[0][1] == pytest.approx(0.1 + 0.1 * (0.5 - 0.8) / (0.2 - 0.8))


# ---------------------------------------------------------------- convergence


def test_iters_to_target():
    assert iters_to_target(np.array([1.0, 0.5, 1e-5, 1e-9]), 1e-4) == 3
    assert iters_to_target(np.array([1.0, 0.5]), 1e-4) == 0
    assert iters_to_target(np.array([1e-9]), 1e-4) == 1


def test_convergence_trace_shape_and_determinism():
    cfg = ExperimentConfig(
        n=200, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=2, max_iters=60
    )
    results = run_convergence(cfg)
    assert len(results) == 1
    res = results[0]
    assert len(res.rows) == 60
    assert res.rows[0][0] == 1 and res.rows[-1][0] == 60
    assert len(res.crossings) == 2
    assert all(c > 0 for c in res.crossings)
    assert res.mean_iters_to_target == pytest.approx(np.mean(res.crossings))
    again = run_convergence(cfg)[0]
    assert again == res


def test_convergence_nan_when_never_crossing():
    cfg = ExperimentConfig(
        n=200, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=1,
        max_iters=3, success_nmse=1e-300,
    )
    res = run_convergence(cfg)[0]
    assert res.crossings == (0,)
    assert np.isnan(res.mean_iters_to_target)


def test_convergence_requires_paired_grids():
    cfg = ExperimentConfig(
        n=100, grid_m_over_n=(0.5, 0.6), grid_k_over_m=(0.1,), trials=1, max_iters=3
    )
    with pytest.raises(ValueError, match="pairwise"):
        run_convergence(cfg)


def test_convergence_rejects_infeasible_case():
    cfg = ExperimentConfig(
        n=4, grid_m_over_n=(0.1,), grid_k_over_m=(0.5,), trials=1, max_iters=3
    )
    with pytest.raises(ValueError, match="infeasible"):
        run_convergence(cfg)


def test_convergence_db_values_are_finite():
    cfg = ExperimentConfig(
        n=200, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=2, max_iters=60
    )
    res = run_convergence(cfg)[0]
    means = np.array([row[1] for row in res.rows])
    assert np.all(np.isfinite(means))


# ---------------------------------------------------------------- runtime


def test_runtime_rows_and_consistency():
    cfg = ExperimentConfig(
        n=128, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=3, max_iters=300
    )
    rows = run_runtime(cfg)
    assert len(rows) == 1
    m_over_n, k_over_m, n, trials, mean_iters, mean_seconds, per_iter = rows[0]
    assert (m_over_n, k_over_m, n, trials) == (0.5, 0.1, 128, 3)
    assert mean_seconds > 0 and per_iter > 0 and mean_iters > 0
    assert mean_seconds == pytest.approx(mean_iters * per_iter, rel=0.2)


def test_runtime_iteration_counts_deterministic():
    cfg = ExperimentConfig(
        n=128, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=2, max_iters=300
    )
    a = run_runtime(cfg)
    b = run_runtime(cfg)
    assert a[0][4] == b[0][4]  # mean_iters identical; seconds may differ


def test_runtime_scales_with_problem_size():
    small = ExperimentConfig(n=64, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=2, max_iters=300)
    large = ExperimentConfig(n=1024, grid_m_over_n=(0.5,), grid_k_over_m=(0.1,), trials=2, max_iters=300)
    per_small = run_runtime(small)[0][6]
    per_large = run_runtime(large)[0][6]
    assert per_large > per_small


# ---------------------------------------------------------------- tables & emit


def test_phase_table_columns_and_rows():
    cells = [_cell(0.5, 0.1, 7)]
    table = phase_table(cells)
    assert table.columns == (
        "m_over_n", "k_over_m", "trials", "successes",
        "success_rate", "mean_iters", "mean_seconds",
    )
    assert table.rows[0][:5] == (0.5, 0.1, 10, 7, 0.7)


def test_other_table_columns():
    assert curve_table([]).columns == ("m_over_n", "k_over_m_at_half_success")
    res = ConvergenceResult(0.5, 0.1, ((1, -3.0, 0.1),), (1,), 1.0)
    assert convergence_table(res).columns == ("iter", "nmse_db_mean", "nmse_db_std")
    assert runtime_table([]).columns == (
        "m_over_n", "k_over_m", "n", "trials",
        "mean_iters", "mean_seconds", "mean_per_iter_seconds",
    )


def test_emit_csv_round_trip_exact(tmp_path):
    rows = ((1 / 3, 0.1, 20, 17, 0.85, 33.25, 0.0), (0.30000000000000004, 0.9, 20, 0, 0.0, 2000.0, 0.0))
    table = phase_table(
        [
            PhaseCell(r[0], r[1], 1, 1, r[2], r[3], r[5], r[6])
            for r in rows
        ]
    )
    path = tmp_path / "t.csv"
    emit(table, "csv", path)
    with open(path, newline="") as fh:
        parsed = list(csv.reader(fh))
    assert tuple(parsed[0]) == table.columns
    for want, got in zip(table.rows, parsed[1:]):
        assert float(got[0]) == want[0]
        assert float(got[1]) == want[1]
        assert int(got[2]) == want[2]
        assert int(got[3]) == want[3]
        assert float(got[4]) == want[4]


def test_emit_empty_table_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit(Table(columns=("a", "b"), rows=()), "csv", path)
    assert path.read_text() == "a,b\n"


def test_emit_json_mirrors_csv_fields(tmp_path):
    table = phase_table([_cell(0.5, 0.1, 7)])
    path = tmp_path / "t.json"
    emit(table, "json", path)
    payload = json.loads(path.read_text())
    assert payload[0] == {
        "m_over_n": 0.5, "k_over_m": 0.1, "trials": 10, "successes": 7,
        "success_rate": 0.7, "mean_iters": 0.0, "mean_seconds": 0.0,
    }


def test_emit_byte_identical_repeats(tmp_path):
    table = phase_table([_cell(0.5, 0.1, 7), _cell(0.5, 0.2, 3)])
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(table, "csv", p1)
    emit(table, "csv", p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_emit_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit(Table(columns=("a",), rows=()), "yaml", tmp_path / "x")
