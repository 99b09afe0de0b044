"""Storage/retrieval dynamics tests: conservation, convergence, decay law."""

import math
from dataclasses import replace

import numpy as np
import pytest

from cavmem.errors import DomainError
from cavmem.memory import (MemoryConfig, PulseShape, bandwidth_scan,
                           energy_scan, lifetime_model, lifetime_scan,
                           mean_photon_from_counts, one_over_e_lifetime_ns,
                           oscillation_suppression, simulate_storage_retrieval,
                           snr_db, total_efficiency)

TWO_PI = 2 * math.pi

CFG = MemoryConfig()                       # calibrated operating point
SIG = PulseShape(0.0, 1.5, 0.8)
WRITE = PulseShape(0.1, 1.6, 0.2)
READ = PulseShape(12.6, 2.7, 1.0, carrier_detuning_ghz=0.5341)

# pulse settings for the loss-free configuration, from the same calibration
OPT_WRITE = PulseShape(0.085, 1.565, (3.515 / 8.4736) ** 2)
OPT_READ = PulseShape(12.585, 2.73, (11.29 / 8.4736) ** 2)
OPT_SIG = PulseShape(0.0, 1.5, 1.0)


def run(config=CFG, sig=SIG, w=WRITE, r=READ, **kw):
    return simulate_storage_retrieval(config, sig, w, r, **kw)


# ----------------------------------------------------------- basic runs

def test_no_interaction_returns_everything():
    cfg = replace(CFG, cooperativity=0.0).lossless()
    res = run(cfg, w=replace(WRITE, energy=0.0), r=replace(READ, energy=0.0))
    assert res.retrieved_counts < 2e-3
    assert res.leak_counts + res.retrieved_counts == pytest.approx(
        res.input_photons, abs=1e-6)


def test_control_off_zero_retrieval_after_signal_gone():
    # with no control the output is just the reflected signal; essentially no
    # flux lands in the retrieval window
    res = run(w=replace(WRITE, energy=0.0), r=replace(READ, energy=0.0))
    assert res.retrieved_counts < 1e-4 * res.reference_counts


def test_lossless_internal_efficiency_exceeds_080():
    cfg = CFG.lossless()
    res = run(cfg, OPT_SIG, OPT_WRITE, OPT_READ)
    assert res.internal_efficiency >= 0.80
    assert res.reference_counts == pytest.approx(res.input_photons, abs=0.05)


def test_operating_point_total_efficiency():
    res = run()
    assert res.total_efficiency == pytest.approx(0.2492, abs=0.005)
    assert res.internal_efficiency == pytest.approx(res.total_efficiency
                                                    / (1 - CFG.zeta()), rel=1e-9)


def test_linearity_in_input_photons():
    res1 = run(sig=replace(SIG, energy=0.4))
    res2 = run(sig=replace(SIG, energy=1.6))
    assert res2.retrieved_counts == pytest.approx(4 * res1.retrieved_counts,
                                                  rel=1e-9)
    assert res2.internal_efficiency == pytest.approx(res1.internal_efficiency,
                                                     rel=1e-9)


def test_photon_bookkeeping_closes():
    cfg = CFG.lossless()
    res = run(cfg, OPT_SIG, OPT_WRITE, OPT_READ)
    b = res.bookkeeping
    # the beat/dephasing kernel removes spin amplitude non-dynamically;
    # account for it via the kernel magnitude at the storage time
    tau = OPT_READ.center_ns - OPT_WRITE.center_ns
    nu = cfg.dephasing_width_mhz * 1e-3
    k2 = (math.exp(-math.pi ** 2 * nu ** 2 * tau ** 2 / (4 * math.log(2)))
          * abs(cfg.line_amp_main + cfg.line_amp_beat
                * np.exp(1j * TWO_PI * cfg.line_splitting_mhz * 1e-3 * tau)) ** 2
          / (cfg.line_amp_main + cfg.line_amp_beat) ** 2)
    stored_at_kernel = (res.input_photons - res.leak_counts
                        - b["loss_polarization"] - 0.0)  # spin loss negligible pre-kernel
    kernel_loss_bound = stored_at_kernel * (1 - k2)
    total = (res.leak_counts + res.retrieved_counts + b["loss_polarization"]
             + b["loss_spin"] + b["loss_cavity_internal"]
             + b["residual_excitation"])
    missing = res.input_photons - total
    assert 0 <= missing <= kernel_loss_bound + 1e-4 * res.input_photons


def test_internal_efficiency_monotone_in_cooperativity():
    effs = []
    for c in (10.0, 100.0, 1000.0, 3800.0):
        cfg = replace(CFG, cooperativity=c).lossless()
        # re-tune the control energy per point (other parameters fixed)
        best = 0.0
        for scale in (0.25, 0.5, 1.0, 2.0, 4.0):
            res = run(cfg, OPT_SIG, replace(OPT_WRITE, energy=OPT_WRITE.energy * scale),
                      replace(OPT_READ, energy=OPT_READ.energy * scale), dt_ns=0.02)
            best = max(best, res.internal_efficiency)
        effs.append(best)
    assert all(b >= a - 1e-6 for a, b in zip(effs, effs[1:]))


def test_step_halving_convergence():
    res1 = run(dt_ns=0.01)
    res2 = run(dt_ns=0.005)
    assert abs(res2.internal_efficiency - res1.internal_efficiency) < 1e-4
    # the runtime convergence check accepts the default step
    run(dt_ns=0.01, check_convergence=True)


def test_overlapping_read_write_rejected():
    with pytest.raises(DomainError):
        run(r=replace(READ, center_ns=2.0))


def test_drift_degrades_efficiency():
    base = run().total_efficiency
    drifted = simulate_storage_retrieval(CFG, SIG, WRITE, READ,
                                         drift_offset_ghz=0.8)
    assert drifted.total_efficiency < 0.6 * base


# ----------------------------------------------------- efficiency algebra

def test_total_efficiency_formula():
    assert total_efficiency(0.84, 1.0, 0.68) == pytest.approx(0.2688)
    assert total_efficiency(0.0, 1.0, 0.5) == 0.0
    assert total_efficiency(1.0, 1.0, 0.0) == 1.0
    with pytest.raises(DomainError):
        total_efficiency(1.0, 0.0, 0.5)


def test_mean_photon_from_counts():
    assert mean_photon_from_counts(0.4, 0.5) == pytest.approx(0.8)
    assert mean_photon_from_counts(0.7, 1.0) == pytest.approx(0.7)
    # detected counts through 87% transmission reproduce the operating photon number
    assert mean_photon_from_counts(0.696, 0.87) == pytest.approx(0.8)
    with pytest.raises(DomainError):
        mean_photon_from_counts(1.0, 0.0)


def test_snr():
    assert snr_db(1.5, 3e-4) == pytest.approx(37.0, abs=0.1)
    assert snr_db(1.0, 1.0) == 0.0
    assert snr_db(10.0, 1.0) == pytest.approx(10.0)
    assert snr_db(1.0, 0.0) == math.inf


# ------------------------------------------------------------- decay law

def test_decay_law_zero_time_value():
    eta0 = lifetime_model(0.0, amp_main=0.51, amp_beat=0.038)
    assert eta0 == pytest.approx((0.51 + 0.038) ** 2, abs=1e-12)
    assert eta0 == pytest.approx(0.30, abs=0.03)


def test_decay_law_constant_limit():
    t = np.linspace(0, 500, 64)
    eta = lifetime_model(t, gamma_m_rad_ns=0.0, nu_prime_ghz=0.0,
                         amp_main=0.7, amp_beat=0.0, omega_rad_ns=1.0)
    assert np.allclose(eta, 0.49, atol=1e-12)


def test_one_over_e_lifetime_against_bisection_oracle():
    gamma = TWO_PI * 0.66e-3
    nu = 0.0126

    def envelope_ratio(t):
        return math.exp(-gamma * t - math.pi ** 2 * nu ** 2 * t ** 2
                        / (4 * math.log(2)))

    lo, hi = 0.0, 500.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if envelope_ratio(mid) > 1 / math.e:
            lo = mid
        else:
            hi = mid
    oracle = 0.5 * (lo + hi)
    assert one_over_e_lifetime_ns(gamma, nu) == pytest.approx(oracle, abs=1e-6)
    assert one_over_e_lifetime_ns(gamma, nu) == pytest.approx(39.0, abs=1.0)


def test_lifetime_scan_follows_decay_law():
    times = np.linspace(10.0, 64.0, 28)
    effs = lifetime_scan(CFG, SIG, WRITE, READ, times, dt_ns=0.02)
    model = lifetime_model(times)
    scale = effs[0] / model[0]
    assert np.allclose(effs, scale * model, rtol=5e-3)


def test_lifetime_scan_huge_spin_decay():
    cfg = replace(CFG, spin_fwhm_mhz=2000.0)
    effs = lifetime_scan(cfg, SIG, WRITE, READ, [8.0, 12.0], dt_ns=0.02)
    assert np.all(effs < 1e-3)


def beat_period_by_fft(times, effs):
    """Oracle: envelope-detrended, zero-padded FFT peak with parabolic refine."""
    coeff = np.polyfit(times, np.log(effs), 4)
    detrended = effs - np.exp(np.polyval(coeff, times))
    dt = times[1] - times[0]
    n_pad = 8 * len(times)
    spec = np.abs(np.fft.rfft(detrended * np.hanning(len(detrended)), n=n_pad))
    freqs = np.fft.rfftfreq(n_pad, dt)
    search = freqs > 0.05  # look above the envelope scale
    ks = np.flatnonzero(search)
    k = ks[int(np.argmax(spec[ks]))]
    y0, y1, y2 = spec[k - 1:k + 2]
    shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    return 1.0 / (freqs[k] + shift * (freqs[1] - freqs[0]))


def test_lifetime_scan_beat_period_by_fft():
    times = np.arange(8.0, 104.0, 0.25)
    effs = lifetime_scan(CFG, SIG, WRITE, READ, times, dt_ns=0.02)
    period = beat_period_by_fft(times, effs)
    assert period == pytest.approx(TWO_PI / (TWO_PI * 0.171), abs=0.1)
    assert period == pytest.approx(5.85, abs=0.1)


def test_lifetime_scan_rejects_overlap():
    with pytest.raises(DomainError):
        lifetime_scan(CFG, SIG, WRITE, READ, [2.0])


def test_simulated_scan_fit_recovers_configured_dephasing():
    # dual route: the estimation module applied to the simulated scan must
    # give back the configured decay-law parameters within 5%
    from cavmem.fitting import fit_lifetime
    times = np.arange(8.0, 100.0, 0.5)
    effs = lifetime_scan(CFG, SIG, WRITE, READ, times, dt_ns=0.01)
    fit = fit_lifetime(times, effs)
    assert fit["nu_prime_ghz"] * 1e3 == pytest.approx(CFG.dephasing_width_mhz,
                                                      rel=0.05)
    assert fit["omega_rad_ns"] == pytest.approx(
        TWO_PI * CFG.line_splitting_mhz * 1e-3, rel=0.05)
    assert fit["amp_main"] == pytest.approx(CFG.line_amp_main, rel=0.05)
    assert fit["amp_beat"] == pytest.approx(CFG.line_amp_beat, rel=0.05)


def test_scan_results_independent_of_point_order():
    times = np.array([9.0, 24.0, 15.0, 40.0])
    a = lifetime_scan(CFG, SIG, WRITE, READ, times, dt_ns=0.02)
    b = lifetime_scan(CFG, SIG, WRITE, READ, times[::-1], dt_ns=0.02)
    assert np.array_equal(a, b[::-1])


# ----------------------------------------------------------------- scans

def test_energy_scan_unimodal_with_optimum_at_02():
    energies = np.linspace(0.02, 1.0, 50)
    effs = energy_scan(CFG, SIG, WRITE, READ, energies, dt_ns=0.02)
    k = int(np.argmax(effs))
    assert energies[k] == pytest.approx(0.2, abs=np.diff(energies)[0])
    # exactly one interior local maximum on the dense grid
    d = np.sign(np.diff(effs))
    switches = np.sum((d[:-1] > 0) & (d[1:] < 0))
    assert switches == 1
    assert effs[0] < 0.3 * effs[k]


def test_energy_scan_zero_energy_zero_efficiency():
    effs = energy_scan(CFG, SIG, WRITE, READ, [0.0], dt_ns=0.02)
    assert effs[0] < 1e-5


def test_bandwidth_scan_plateau():
    fwhms = np.array([0.6, 1.0, 1.5, 3.0])
    effs = bandwidth_scan(CFG, SIG, WRITE, READ, fwhms, dt_ns=0.02)
    # efficiency at 1.5 ns sits within 5% of the 3 ns plateau
    assert abs(effs[2] / effs[3] - 1.0) <= 0.05
    # well below the cavity response time the efficiency falls off
    assert effs[0] < 0.8 * effs[3]
    # quasi-cw regime: successive differences shrink
    assert abs(effs[3] - effs[2]) < abs(effs[1] - effs[0])


def test_narrower_cavity_needs_longer_pulses():
    # oracle: monotonicity sweep; halving the cavity linewidth pushes the
    # 5%-saturation threshold to larger signal widths.  Compared on matched
    # loss-free configurations with resonant pulses so only the cavity
    # bandwidth differs.
    import cavmem.cavity as cav

    def saturation_threshold(cfg):
        fwhms = np.array([0.5, 0.8, 1.2, 1.8, 2.6, 3.6])
        effs = bandwidth_scan(cfg, SIG, WRITE, replace(READ, carrier_detuning_ghz=0.0),
                              fwhms, dt_ns=0.02, refine_rounds=2)
        plateau = np.max(effs)
        return fwhms[np.argmax(effs >= 0.95 * plateau)]

    base = CFG.lossless()
    narrow = replace(base, cavity=replace(base.cavity, r1=0.7753))
    assert cav.linewidth_ghz(narrow.cavity) == pytest.approx(
        0.5 * cav.linewidth_ghz(base.cavity), rel=0.02)
    assert saturation_threshold(narrow) > saturation_threshold(base)


def test_oscillation_suppression_values():
    ratio_169 = oscillation_suppression(169.0, CFG)
    ratio_250 = oscillation_suppression(250.0, CFG)
    assert 0.04 < ratio_169 < 0.2          # secondary line is weak
    factor = ratio_169 / ratio_250
    assert 5.0 <= factor <= 20.0


def test_suppression_wide_excitation_limit():
    # an arbitrarily short excitation pulse has flat spectrum: only the cavity
    # response weights the companions, and the dominant weighted companion
    # sets the ratio
    import cavmem.cavity as cav
    from cavmem.atomic import group_two_photon_lines, two_photon_lines
    lines = group_two_photon_lines(two_photon_lines(
        169.0, "sigma-", "sigma-", total_window_ghz=(-30.0, 10.0)))
    main = max(lines, key=lambda t: t[1])
    kappa = cav.linewidth_ghz(CFG.cavity)
    expected = max(
        (t[1] / main[1]) / (1 + (2 * abs(t[0] - main[0]) / kappa) ** 2)
        for t in lines if t is not main and abs(t[0] - main[0]) < 3.0)
    cfg_wide = replace(CFG, excitation_fwhm_ns=1e-6)
    assert oscillation_suppression(169.0, cfg_wide) == pytest.approx(
        expected, rel=1e-6)


# ------------------------------------------------------------ validation

def test_pulse_validation():
    with pytest.raises(DomainError):
        PulseShape(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        PulseShape(0.0, 1.0, -1.0)


def test_config_validation():
    with pytest.raises(DomainError):
        MemoryConfig(cooperativity=-1.0)
    with pytest.raises(DomainError):
        MemoryConfig(insertion_loss=1.5)
