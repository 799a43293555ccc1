import os

import numpy as np
import pytest

import fourdsim as f

DATA_DIR = os.environ.get("FOURDSIM_DATA_DIR", "data")


def test_formats_and_geometry():
    c = f.make_pm8qam()
    assert len(c) == 64
    assert c.bits_per_symbol == 6
    pts = c.points
    assert pts.shape == (64, 4)
    # unit mean symbol energy
    assert np.mean(np.sum(pts**2, axis=1)) == pytest.approx(1.0, abs=1e-12)
    assert sorted(c.labels) == list(range(64))

    a = f.make_2a8psk_6b(0.65)
    e = np.sum(a.points**2, axis=1)
    assert np.ptp(e) < 1e-12  # constant modulus
    assert f.distinct_sops(a, 1e-3) == 8

    prs = f.load_constellation(os.path.join(DATA_DIR, "constellations", "prs64.csv"))
    assert f.distinct_sops(prs, 1e-3) == 16
    assert f.energy_variance(prs) < 1e-12


def test_metrics_roundtrip():
    c = f.make_pm8qam()
    tx = c.points[np.random.RandomState(0).randint(0, 64, 500)]
    sigma2 = f.noise_sigma2_per_dim(12.0)
    llrs = f.llr_exact(c, tx, sigma2)
    assert llrs.shape == (500, 6)

    d = f.awgn_gmi_sweep(c, [8.0, 10.0, 12.0], 20000, 1)
    assert list(d["snr_db"]) == [8.0, 10.0, 12.0]
    assert np.all(np.diff(d["gmi"]) > 0)
    assert np.all(np.diff(d["ber"]) < 0)
    assert np.allclose(d["ngmi"], d["gmi"] / 6.0)

    snr = f.required_snr_at(c, [8.0, 9.0, 10.0, 11.0], 50000, 1, 5.1)
    assert 8.8 < snr < 9.5


def test_optimizer_zero_iters_echo():
    cfg = f.OptimizerConfig()
    cfg.max_iters = 0
    cfg.n_mc_symbols = 2000
    cfg.constraint = f.ShapeConstraint.CONSTANT_MODULUS
    start = f.make_2a8psk_6b(0.6)
    out, trace = f.optimize_gmi(start, cfg)
    assert len(trace) == 1
    assert np.allclose(out.points, start.points, atol=1e-12)


def test_fec_roundtrip():
    code = f.load_code(os.path.join(DATA_DIR, "codes", "ira_n6480_r45.txt"))
    assert (code.n, code.k) == (6480, 5184)
    rng = np.random.RandomState(1)
    info = rng.randint(0, 2, code.k).astype(np.uint8)
    cw = f.ldpc_encode(code, list(info))
    llrs = [10.0 if b == 0 else -10.0 for b in cw]
    bits, iters, converged = f.ldpc_decode(code, llrs)
    assert converged
    assert list(bits[: code.k]) == list(info)

    r = f.post_fec_chain(f.make_pm8qam(), code, 10.0, 2, 7)
    assert r["post_fec_ber"] == 0.0
    assert r["ngmi"] > 0.85


def test_dsp_chain():
    c = f.make_pm8qam()
    rng = np.random.RandomState(2)
    idx = rng.randint(0, 64, 8192)
    tx = c.points[idx]
    wf = f.rrc_shape(tx)
    fiber = f.FiberParams()
    fiber.gamma_per_w_km = 0.0
    fiber.alpha_db_per_km = 0.0
    prop = f.ssfm_propagate(wf, fiber, 5.0)
    comp = f.cd_compensate(prop, fiber.dispersion_ps_nm_km * fiber.length_km)
    rx = f.matched_filter_downsample(comp)
    assert f.evm(rx, tx) < 0.01

    offset, ambiguous = f.freq_offset_recover(wf, 1e9)[1:]
    assert not ambiguous
    assert abs(offset) < 1e6

    sync = f.synchronize(tx, np.roll(tx, -5, axis=0))
    assert sync[2] and sync[0] == 5
