import math

import numpy as np
import pytest
from scipy import integrate

import qhawkes as qh

EXP_HAWKES = {"diagonal.kind": "exponential", "diagonal.n_h": "0.5", "diagonal.beta": "1"}


def test_presets_carry_norms():
    presets = qh.presets()
    assert set(presets) == {"zhawkes-paper", "hawkes-benchmark"}
    norms = qh.kernel_norms(presets["zhawkes-paper"])
    assert norms["n_h"] == pytest.approx(0.8, rel=1e-12)
    assert norms["n_z"] == pytest.approx(0.1, rel=1e-12)
    assert norms["trace"] == pytest.approx(0.9, rel=1e-12)


def test_stationary_rate_of_exponential_hawkes():
    info = qh.stationarity(EXP_HAWKES)
    assert info["status"] == "stationary"
    assert info["mean_intensity"] == pytest.approx(2.0)
    stream = qh.simulate(EXP_HAWKES, events=200_000, seed=3)
    assert len(stream) >= 0.99 * 200_000
    assert len(stream) / stream.horizon == pytest.approx(2.0, rel=0.03)
    assert set(np.unique(stream.signs)) <= {-1, 1}
    assert np.all(np.diff(stream.times) > 0)


def test_simulation_is_deterministic_per_seed():
    a = qh.simulate(EXP_HAWKES, events=5000, seed=9)
    b = qh.simulate(EXP_HAWKES, events=5000, seed=9)
    c = qh.simulate(EXP_HAWKES, events=5000, seed=10)
    np.testing.assert_array_equal(a.times, b.times)
    assert not np.array_equal(a.times[:100], c.times[:100])


def test_bins_from_user_stream():
    s = qh.EventStream([0.5, 1.2, 1.7, 2.5], [1, 1, -1, 1], horizon=3.0)
    bins = s.bins(1.0)
    np.testing.assert_array_equal(bins.count, [1, 2, 1])
    np.testing.assert_allclose(bins.ret, [1.0, 0.0, 1.0])
    assert s.price_at(2.0) == 1.0


def test_bad_model_raises_value_error():
    with pytest.raises(ValueError):
        qh.kernel_norms({"diagonal.kind": "exponential", "diagonal.n_h": "0.5", "diagonal.beta": "-1"})
    with pytest.raises(qh.DomainError):
        qh.phase_exponents(0.0, 1.0)


def test_phase_exponents_interior_points():
    r = qh.phase_exponents(0.4, 0.95)
    assert (r["beta"], r["beta_prime"], r["rho"], r["branch"]) == (1.4, 1.4, 0.95, 1)
    r = qh.phase_exponents(0.2, 0.7, critical=True)
    assert r["beta"] == pytest.approx(4 * 0.7 - 0.4 - 2)
    assert r["beta_prime"] == pytest.approx(0.8)


def test_astar_and_tail_exponents():
    for n_h in (0.2, 0.5, 0.8):
        a = qh.astar(n_h, 0.1, 1e-8)["a_star"]
        assert a == pytest.approx(n_h / (1 - n_h), rel=1e-6)
    t = qh.tail_exponents(0.2, 0.5)
    assert t["nu"] == pytest.approx(1 + 1 / (0.2 * 1.5))


def test_stationary_cdf_matches_integrated_density():
    for v in (1.2, 3.0, 40.0):
        # sqrt substitution removes the integrable singularity at v = 1
        mass, _ = integrate.quad(lambda s: 2 * s * qh.stationary_density_nohawkes(1 + s * s, 0.3), 0, math.sqrt(v - 1))
        assert qh.stationary_cdf_nohawkes(v, 0.3) == pytest.approx(mass, rel=1e-8)


def test_diffusion_samples_follow_closed_form():
    v = np.sort(qh.sample_stationary(0.0, 0.5, n=20_000, seed=2))
    cdf = np.array([qh.stationary_cdf_nohawkes(x, 0.5) for x in v])
    ecdf = np.arange(1, len(v) + 1) / len(v)
    assert np.max(np.abs(cdf - ecdf)) < 0.03
    assert v.min() >= 1.0


def test_hill_on_pareto_sample():
    rng = np.random.default_rng(5)
    x = rng.uniform(size=400_000) ** (-1 / 2)  # cumulative exponent 2
    h = qh.hill_exponent(x, 0.01)
    assert h["nu_hill"] == pytest.approx(3.0, abs=0.15)
    assert h["n_tail"] == 4000


def test_rs_vol_direct_arithmetic():
    expected = math.sqrt(math.log(1.01) ** 2 + math.log(0.99) ** 2)
    assert qh.rs_vol(100, 101, 99, 100) == pytest.approx(expected, rel=1e-12)


def test_tra_ratio_is_bounded():
    rng = np.random.default_rng(1)
    r = rng.standard_normal(5000)
    out = qh.tra_curve(np.abs(r) + 0.1, r, 10)
    assert out["delta"].shape == (10,)
    assert np.all(np.abs(out["delta"]) <= 1)


def rank_one_diag(q=18, g=0.09, alpha=0.6, k0=0.14, omega=0.15):
    lags = np.arange(1, q + 1)
    k = k0 * np.exp(-omega * lags)
    return np.outer(k, k) + np.diag(g * lags ** (-alpha))


def test_rank_one_diag_fit_on_exact_matrix():
    fit = qh.rank_one_diag_fit(rank_one_diag())
    assert fit["residual"] < 1e-10
    assert fit["g"] == pytest.approx(0.09, rel=1e-6)
    assert fit["alpha"] == pytest.approx(0.6, rel=1e-6)
    assert fit["omega"] == pytest.approx(0.15, rel=1e-6)


def test_qarch_gmm_round_trip():
    kmat = rank_one_diag(q=6)
    r = qh.simulate_qarch(kmat, 1 - np.trace(kmat), 300_000, seed=4)
    r = (r - r.mean()) / r.std()
    gmm = qh.gmm_estimate(r, 6)
    assert gmm["kmat"].shape == (6, 6)
    assert gmm["trace"] == pytest.approx(np.trace(kmat), rel=0.1)


def test_normalize_panel(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["stock_id,date,bin,open,high,low,close"]
    for stock in ("AAA", "BBB", "CCC"):
        price = 50.0
        for day in range(20):
            for b in range(12):
                o = price
                c = o * math.exp(0.002 * rng.standard_normal())
                hi, lo = max(o, c) * 1.0005, min(o, c) * 0.9995
                lines.append(f"{stock},2021-01-{day + 1:02d},{b},{o!r},{hi!r},{lo!r},{c!r}")
                price = c
    path = tmp_path / "panel.csv"
    path.write_text("\n".join(lines) + "\n")
    out = qh.normalize_panel(str(path))
    assert out["returns"].shape == (3, 20, 12)
    assert out["stocks"] == ["AAA", "BBB", "CCC"]
    for u in range(3):
        kept = out["returns"][u][out["kept"][u]]
        assert np.mean(kept) == pytest.approx(0.0, abs=1e-9)
        assert np.mean(kept**2) == pytest.approx(1.0, rel=1e-9)
