import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

import oracles
from ddos_ews.exceptions import BadConfig, DegenerateMatrix, SigmaZero, TooShort, ZeroMean
from ddos_ews.indicators import (
    coefficient_of_variation,
    fit_ar1,
    indicator_trajectory,
    lag1_autocorrelation,
    matrix_trajectory,
    read_trajectory_csv,
    return_rate,
    skewness,
    summary_stats,
    trajectory_arrays,
    write_trajectory_csv,
)
from ddos_ews.ingest import PacketTrace
from ddos_ews.timeseries import ObservableMatrix, WindowSeries, segment_windows


def ar1(phi, n, rng):
    return lfilter([1.0], [1.0, -phi], rng.standard_normal(n))


series_values = st.lists(st.floats(-1e3, 1e3, allow_nan=False, width=64), min_size=3, max_size=60)


# --- summary stats ------------------------------------------------------------

def test_summary_constant():
    s = summary_stats(WindowSeries([2, 2, 2]))
    assert (s.mu, s.sd, s.var) == (2.0, 0.0, 0.0)


def test_summary_two_sizes():
    s = summary_stats([60, 1500])
    assert s.mu == 780.0
    # 720 * sqrt(2), from the n - 1 divisor
    assert s.sd == pytest.approx(1018.2337649086285, abs=1e-9)
    assert s.var == pytest.approx(720.0 ** 2)


def test_summary_too_short():
    with pytest.raises(TooShort):
        summary_stats([5.0])


# --- lag-1 autocorrelation ----------------------------------------------------

def test_ac1_alternating_is_minus_one():
    assert lag1_autocorrelation([1, 2, 1, 2, 1, 2]) == pytest.approx(-1.0, abs=1e-15)


def test_ac1_constant_and_short():
    with pytest.raises(SigmaZero):
        lag1_autocorrelation([5, 5, 5, 5])
    with pytest.raises(TooShort):
        lag1_autocorrelation([1, 2])


def test_ac1_white_noise_bound():
    n = 10_000
    passed = sum(
        abs(lag1_autocorrelation(np.random.default_rng(seed).uniform(size=n))) < 3 / math.sqrt(n)
        for seed in range(100)
    )
    assert passed >= 99


@settings(max_examples=200, deadline=None)
@given(z=series_values)
def test_ac1_matches_bruteforce(z):
    try:
        expected = oracles.ac1(z)
    except oracles.Undefined:
        with pytest.raises(SigmaZero):
            lag1_autocorrelation(z)
        return
    assume(np.var(z) > 1e-12)
    assert lag1_autocorrelation(z) == pytest.approx(expected, abs=1e-9)


# --- coefficient of variation -------------------------------------------------

def test_cv_examples():
    assert coefficient_of_variation([2, 2, 2]) == 0.0
    assert coefficient_of_variation([60, 1500]) == pytest.approx(1.3054279037290109, abs=1e-12)
    with pytest.raises(ZeroMean):
        coefficient_of_variation([0, 0, 0])


# --- skewness ---------------------------------------------------------------

def test_skew_symmetric_is_zero():
    assert skewness([1, 2, 3]) == 0.0
    assert skewness([1, 2, 3], "sqrt-m2") == 0.0


def test_skew_variants():
    # m2 = 0.1875, m3 = 0.09375
    assert skewness([0, 0, 0, 1]) == pytest.approx(1.1547005383792515, abs=1e-12)
    assert skewness([0, 0, 0, 1], "sqrt-m2") == pytest.approx(0.21650635094610968, abs=1e-12)


def test_skew_errors():
    with pytest.raises(SigmaZero):
        skewness([3, 3, 3])
    with pytest.raises(TooShort):
        skewness([1, 2])
    with pytest.raises(BadConfig):
        skewness([1, 2, 4], "kurtosis")


@settings(max_examples=200, deadline=None)
@given(z=series_values)
def test_skew_matches_bruteforce(z):
    assume(len(set(z)) > 1 and np.var(z) > 1e-6)
    assert skewness(z) == pytest.approx(oracles.skew_standard(z), abs=1e-9)
    assert skewness(z, "sqrt-m2") == pytest.approx(oracles.skew_sqrt_m2(z), rel=1e-9, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(z=st.lists(st.floats(0.5, 100, allow_nan=False), min_size=3, max_size=50),
       c=st.floats(0.5, 100), k=st.floats(0.1, 50))
def test_shift_and_scale_invariance(z, c, k):
    z = np.asarray(z)
    assume(np.std(z) > 1e-3 * np.mean(np.abs(z)))
    shifted, scaled = z + c, z * k
    assert lag1_autocorrelation(shifted) == pytest.approx(lag1_autocorrelation(z), abs=1e-8)
    assert skewness(shifted) == pytest.approx(skewness(z), abs=1e-7)
    assert skewness(shifted, "sqrt-m2") == pytest.approx(skewness(z, "sqrt-m2"), rel=1e-7, abs=1e-7)
    sd = summary_stats(z).sd
    assert coefficient_of_variation(shifted) == pytest.approx(sd / (np.mean(z) + c), rel=1e-9)
    assert lag1_autocorrelation(scaled) == pytest.approx(lag1_autocorrelation(z), abs=1e-8)
    assert skewness(scaled) == pytest.approx(skewness(z), abs=1e-7)
    assert coefficient_of_variation(scaled) == pytest.approx(coefficient_of_variation(z), rel=1e-9)


# --- return rate --------------------------------------------------------------

def test_return_rate_ar08():
    hits = 0
    for seed in range(100):
        rr, fit = return_rate(ar1(0.8, 10_000, np.random.default_rng(seed)))
        hits += abs(rr - 0.2) <= 0.05
        assert fit.lam >= 0
    assert hits >= 95


def test_return_rate_white_noise():
    for seed in range(20):
        rr, _ = return_rate(np.random.default_rng(seed).standard_normal(10_000))
        assert rr == pytest.approx(1.0, abs=0.05)


def test_return_rate_degenerate():
    with pytest.raises(DegenerateMatrix):
        return_rate(np.full((3, 50), 60.0))
    with pytest.raises(TooShort):
        return_rate(np.arange(5.0))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), phi=st.floats(0.0, 0.95), n=st.integers(10, 400))
def test_scalar_lambda_is_ols_slope(seed, phi, n):
    z = 500 + 40 * ar1(phi, n, np.random.default_rng(seed))
    fit = fit_ar1(ObservableMatrix((0,), 0.1, z[None, :]))
    assert fit.lam == pytest.approx(abs(oracles.ols_slope_demeaned(z.tolist())), abs=1e-9)


def test_multirow_operator():
    rng = np.random.default_rng(3)
    rows = np.vstack([ar1(0.6, 5000, rng), ar1(0.3, 5000, rng), ar1(0.1, 5000, rng)])
    rr, fit = return_rate(rows)
    assert fit.coef.shape == (3, 3)
    assert fit.lam == pytest.approx(0.6, abs=0.05)
    assert rr == pytest.approx(1 - fit.lam)


def test_multirow_collinear_rows_survive_ridge():
    rng = np.random.default_rng(4)
    base = ar1(0.7, 3000, rng)
    rr, fit = return_rate(np.vstack([base, base * 2 + 1, base + 1e-9 * rng.standard_normal(3000)]))
    assert 0 <= rr <= 1
    assert fit.lam == pytest.approx(0.7, abs=0.05)


def test_multirow_with_constant_row():
    rng = np.random.default_rng(5)
    rr, fit = return_rate(np.vstack([ar1(0.5, 4000, rng), np.full(4000, 60.0)]))
    assert fit.lam == pytest.approx(0.5, abs=0.05)


# --- trajectories -------------------------------------------------------------

def _window(t, size, duration=60.0, dest=None):
    dest = np.zeros(len(t), dtype=int) if dest is None else dest
    return segment_windows(PacketTrace(t, dest, size, duration=duration))[0]


def test_trajectory_sample_count():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 60, 6000)).round(6)
    traj = indicator_trajectory(_window(t, rng.integers(60, 1501, 6000)), sub_len=10, sub_stride=1)
    assert len(traj) == 51
    assert traj[0].t_mid == pytest.approx(5.0)
    assert traj[-1].t_mid == pytest.approx(55.0)


def test_trajectory_constant_subwindow_nulls():
    t = np.arange(0, 60, 0.01).round(6)
    traj = indicator_trajectory(_window(t, np.full(len(t), 60)), sub_len=10, sub_stride=1)
    s = traj[0]
    assert s.ac1 is None and s.null_reasons["ac1"] == "SigmaZero"
    assert s.skewness is None and s.null_reasons["skewness"] == "SigmaZero"
    assert s.return_rate is None and s.null_reasons["return_rate"] == "DegenerateMatrix"
    assert s.cv == 0.0
    assert len(traj) == 51  # never dropped


def test_trajectory_bad_config():
    w = _window(np.arange(0, 60, 0.5), np.full(120, 60))
    with pytest.raises(BadConfig):
        indicator_trajectory(w, sub_len=60)
    with pytest.raises(BadConfig):
        indicator_trajectory(w, sub_len=10, sub_stride=0)
    with pytest.raises(BadConfig):
        indicator_trajectory(w, sub_len=10.05)


def test_trajectory_agrees_with_scalar_functions():
    rng = np.random.default_rng(9)
    values = 100 + 30 * ar1(0.6, 600, rng) + 5 * rng.standard_normal(600) ** 2
    m = ObservableMatrix((0,), 0.1, values[None, :], 0.0)
    for skew in ("standard", "sqrt-m2"):
        for detrend in (False, True):
            traj = matrix_trajectory(m, sub_len=10, sub_stride=2.5, skew=skew, detrend=detrend)
            for k, s in enumerate(traj):
                seg = values[k * 25:k * 25 + 100]
                assert s.ac1 == pytest.approx(lag1_autocorrelation(seg, detrend=detrend), abs=1e-12)
                assert s.cv == pytest.approx(coefficient_of_variation(seg), abs=1e-12)
                assert s.skewness == pytest.approx(skewness(seg, skew, detrend=detrend), abs=1e-12)
                assert s.return_rate == pytest.approx(return_rate(seg, detrend=detrend)[0], abs=1e-12)


def test_trajectory_multirow_uses_submatrix():
    rng = np.random.default_rng(2)
    values = np.vstack([100 + 20 * ar1(0.5, 600, rng), 200 + 20 * ar1(0.5, 600, rng)])
    m = ObservableMatrix((0, 1), 0.1, values, 0.0)
    traj = matrix_trajectory(m, sub_len=20, sub_stride=10)
    assert len(traj) == 5
    for k, s in enumerate(traj):
        sub = values[:, k * 100:k * 100 + 200]
        assert s.return_rate == pytest.approx(return_rate(sub)[0], abs=1e-12)
        assert s.ac1 == pytest.approx(lag1_autocorrelation(sub.mean(axis=0)), abs=1e-12)


def test_detrend_removes_linear_ramp():
    z = np.arange(200.0) * 3 + 7 + np.random.default_rng(1).standard_normal(200)
    assert lag1_autocorrelation(z) > 0.9
    assert abs(lag1_autocorrelation(z, detrend=True)) < 0.3


def test_ramping_phi_gives_rising_ac1():
    from ddos_ews.synth import PhaseSpec, ScenarioSpec, generate_scenario

    thirds = []
    for seed in range(20):
        spec = ScenarioSpec(60.0, [PhaseSpec("csd-ramp", 60.0, phi_start=0.2, phi_end=0.95)], seed=seed)
        trace = generate_scenario(spec)
        ac1 = trajectory_arrays(indicator_trajectory(segment_windows(trace)[0]))["ac1"]
        thirds.append([np.median(part) for part in np.array_split(ac1, 3)])
    med = np.median(thirds, axis=0)
    assert med[0] < med[1] < med[2]


def test_trajectory_csv_round_trip(tmp_path):
    t = np.arange(0, 60, 0.01).round(6)
    size = np.where(t < 20, 60, np.random.default_rng(0).integers(60, 1501, len(t)))
    traj = indicator_trajectory(_window(t, size), sub_len=10, sub_stride=1)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    back = read_trajectory_csv(tmp_path / "t.csv")
    assert back == traj
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "t_mid,return_rate,ac1,cv,skewness,null_reasons"
