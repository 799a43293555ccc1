#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "fourdsim/channel.hpp"
#include "fourdsim/metrics.hpp"
#include "fourdsim/rng.hpp"
#include "fourdsim/rxdsp.hpp"

using namespace fourdsim;
using cd = std::complex<double>;

namespace {

constexpr double kSymbolRate = 41.79e9;
constexpr double kRolloff = 0.01;
constexpr int kSps = 2;
constexpr int kSpan = 2048;

std::vector<Point4> random_symbols(const Constellation4D& c, std::size_t n, std::uint64_t seed) {
    rng::Stream st{seed, 77};
    std::vector<Point4> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = c.point(st.integer(i, c.size()));
    return s;
}

// white noise sized so the matched-filter output sees the metrics-module
// noise variance for this SNR
void add_waveform_noise(Waveform& wf, double snr_db, std::uint64_t seed) {
    const double v = kSps * noise_sigma2_per_dim(snr_db);
    rng::Stream ns{seed, 0x4e4f4953ULL};
    for (std::size_t i = 0; i < wf.size(); ++i) {
        const auto g1 = ns.gaussian_pair(2 * i);
        const auto g2 = ns.gaussian_pair(2 * i + 1);
        wf.x[i] += std::sqrt(v) * cd(g1.real(), g1.imag());
        wf.y[i] += std::sqrt(v) * cd(g2.real(), g2.imag());
    }
}

void rotate_pols(Waveform& wf, double theta) {
    for (std::size_t i = 0; i < wf.size(); ++i) {
        const cd x = wf.x[i], y = wf.y[i];
        wf.x[i] = std::cos(theta) * x + std::sin(theta) * y;
        wf.y[i] = -std::sin(theta) * x + std::cos(theta) * y;
    }
}

double tail_ber(const Constellation4D& c, std::span<const Point4> out,
                std::span<const Point4> tx, std::size_t from) {
    std::size_t errs = 0, bits = 0;
    for (std::size_t i = from; i < out.size(); ++i) {
        const auto l1 = demap_hard(c, out[i]);
        const auto l2 = demap_hard(c, tx[i]);
        errs += __builtin_popcount(l1 ^ l2);
        bits += c.bits_per_symbol();
    }
    return static_cast<double>(errs) / static_cast<double>(bits);
}

}  // namespace

TEST_CASE("cd_apply and cd_compensate are an inverse pair") {
    auto c = make_pm8qam();
    auto syms = random_symbols(c, 4096, 1);
    auto wf = rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate);

    const double d_total = 17.0 * 1500.0;  // ps/nm
    auto spread = cd_apply(wf, d_total);
    // dispersion smears the frame but conserves energy
    CHECK(average_power(spread) == doctest::Approx(average_power(wf)).epsilon(1e-9));
    auto back = cd_compensate(spread, d_total);
    double worst = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i) {
        worst = std::max(worst, std::abs(back.x[i] - wf.x[i]));
        worst = std::max(worst, std::abs(back.y[i] - wf.y[i]));
    }
    CHECK(worst < 1e-9);

    auto same = cd_apply(wf, 0.0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(same.x[i] == wf.x[i]);
}

TEST_CASE("cd_apply matches linear lossless fiber propagation") {
    auto c = make_pm8qam();
    auto syms = random_symbols(c, 4096, 2);
    auto wf = rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate);

    FiberParams fiber;
    fiber.alpha_db_per_km = 0.0;
    fiber.gamma_per_w_km = 0.0;
    auto prop = ssfm_propagate(wf, fiber, 25.0);
    auto analytic = cd_apply(wf, fiber.dispersion_ps_nm_km * fiber.length_km,
                             fiber.reference_wavelength_nm);
    double worst = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i)
        worst = std::max(worst, std::abs(prop.x[i] - analytic.x[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("1500 km of dispersion round trips to back-to-back quality") {
    auto c = make_pm8qam();
    auto syms = random_symbols(c, 8192, 3);
    auto wf = rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate);

    auto b2b = matched_filter_downsample(wf, kRolloff, kSps, kSpan);
    const double evm_b2b = evm(b2b, syms);

    auto rt = cd_compensate(cd_apply(wf, 17.0 * 1500.0), 17.0 * 1500.0);
    auto rt_syms = matched_filter_downsample(rt, kRolloff, kSps, kSpan);
    const double evm_rt = evm(rt_syms, syms);
    CHECK(std::abs(evm_rt - evm_b2b) < 1e-3);
}

TEST_CASE("frequency offset recovery") {
    auto c = make_pm8qam();
    auto syms = random_symbols(c, 16384, 4);
    auto wf = rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate);

    for (double off : {100e6, 0.0}) {
        Waveform shifted = wf;
        for (std::size_t i = 0; i < shifted.size(); ++i) {
            const cd r = std::polar(1.0, 2.0 * M_PI * off * i / shifted.sample_rate);
            shifted.x[i] *= r;
            shifted.y[i] *= r;
        }
        auto res = freq_offset_recover(shifted, 1e9);
        CHECK_FALSE(res.ambiguous);
        CHECK(std::abs(res.offset_hz - off) < 1e6);
        // the residual offset is a slow phase ramp that phase tracking absorbs
        auto rec = matched_filter_downsample(res.corrected, kRolloff, kSps, kSpan);
        auto tracked = bps(rec, c, 32, 64);
        CHECK(tail_ber(c, tracked.symbols, syms, 64) == 0.0);
    }

    // noise-only input has no spectral line
    Waveform noise = wf;
    rng::Stream ns{7, 8};
    for (std::size_t i = 0; i < noise.size(); ++i) {
        const auto g1 = ns.gaussian_pair(2 * i);
        const auto g2 = ns.gaussian_pair(2 * i + 1);
        noise.x[i] = cd(g1.real(), g1.imag());
        noise.y[i] = cd(g2.real(), g2.imag());
    }
    CHECK(freq_offset_recover(noise, 1e9).ambiguous);

    // offset beyond the stated search range cannot be trusted
    Waveform far = wf;
    for (std::size_t i = 0; i < far.size(); ++i) {
        const cd r = std::polar(1.0, 2.0 * M_PI * 2e9 * i / far.sample_rate);
        far.x[i] *= r;
        far.y[i] *= r;
    }
    auto res = freq_offset_recover(far, 500e6);
    CHECK((res.ambiguous || std::abs(res.offset_hz - 2e9) > 100e6));
}

TEST_CASE("equalizer on the identity channel") {
    auto c = make_pm8qam();
    const std::size_t n = 16384;
    auto syms = random_symbols(c, n, 5);
    auto wf = matched_filter(rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate), kRolloff,
                             kSps, kSpan);
    EqualizerState st;
    auto out = mimo_equalize(wf, c, st, std::span(syms).subspan(0, 4000));
    CHECK_FALSE(st.failed);
    CHECK(evm(std::span(out).subspan(6000), std::span(syms).subspan(6000)) < 0.01);

    EqualizerState even_taps;
    even_taps.taps = 10;
    CHECK_THROWS(mimo_equalize(wf, c, even_taps, syms));
}

TEST_CASE("static 45 degree polarization rotation is recovered") {
    auto c = make_pm8qam();
    const std::size_t n = 16384;
    auto syms = random_symbols(c, n, 6);
    auto wf = matched_filter(rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate), kRolloff,
                             kSps, kSpan);
    rotate_pols(wf, M_PI / 4.0);
    add_waveform_noise(wf, 20.0, 9);

    EqualizerState st;
    auto out = mimo_equalize(wf, c, st, std::span(syms).subspan(0, 8000));
    CHECK_FALSE(st.failed);
    CHECK(tail_ber(c, out, syms, 10000) == 0.0);
}

TEST_CASE("equalizer converges on a unitary channel at 15 dB") {
    auto c = make_2a8psk_6b(0.65);
    const std::size_t n = 32768;
    auto syms = random_symbols(c, n, 7);
    auto wf = matched_filter(rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate), kRolloff,
                             kSps, kSpan);
    // arbitrary unitary: rotation + differential phase
    rotate_pols(wf, 0.6);
    for (std::size_t i = 0; i < wf.size(); ++i) wf.y[i] *= std::polar(1.0, 0.8);
    add_waveform_noise(wf, 15.0, 11);

    EqualizerState st;
    auto out = mimo_equalize(wf, c, st, std::span(syms).subspan(0, 20000));
    CHECK_FALSE(st.failed);

    // the format's intrinsic error rate at 15 dB, without any channel
    auto awgn = awgn_symbols(syms, SnrPoint{15.0}, 21);
    std::size_t ref_errs = 0;
    for (std::size_t i = 22000; i < n; ++i)
        ref_errs += __builtin_popcount(demap_hard(c, awgn[i]) ^ demap_hard(c, syms[i]));
    const double ref_ber = static_cast<double>(ref_errs) / (6.0 * (n - 22000));
    CHECK(tail_ber(c, out, syms, 22000) < 2.0 * ref_ber + 2e-3);

    // pure noise never settles
    Waveform junk = wf;
    rng::Stream ns{13, 5};
    for (std::size_t i = 0; i < junk.size(); ++i) {
        const auto g1 = ns.gaussian_pair(2 * i);
        const auto g2 = ns.gaussian_pair(2 * i + 1);
        junk.x[i] = cd(g1.real(), g1.imag());
        junk.y[i] = cd(g2.real(), g2.imag());
    }
    EqualizerState st2;
    mimo_equalize(junk, c, st2, std::span(syms).subspan(0, 20000));
    CHECK(st2.failed);
}

TEST_CASE("phase-noise random walk costs less than 0.5 dB at the operating point") {
    auto c = make_pm8qam();
    const std::size_t n = 32768;
    auto syms = random_symbols(c, n, 8);
    auto clean = matched_filter(rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate), kRolloff,
                                kSps, kSpan);

    const auto run = [&](double snr_db, bool walk) {
        Waveform wf = clean;
        if (walk) {
            rng::Stream ps{11, 3};
            double ph = 0.0;
            for (std::size_t i = 0; i < wf.size(); ++i) {
                if (i % kSps == 0) ph += (M_PI / 100.0) * ps.gaussian(i);
                const cd r = std::polar(1.0, ph);
                wf.x[i] *= r;
                wf.y[i] *= r;
            }
        }
        add_waveform_noise(wf, snr_db, 17);
        EqualizerState st;
        st.bps = {32, 64};
        auto out = mimo_equalize(wf, c, st, std::span(syms).subspan(0, 8000));
        return tail_ber(c, out, syms, 10000);
    };

    const double ber_walk = run(9.0, true);
    const double ber_ref_penalized = run(8.5, false);
    CHECK(ber_walk > 0.0);  // the operating point is noisy by design
    // 3e-3 covers the monte carlo spread of the two BER estimates
    CHECK(ber_walk <= ber_ref_penalized + 3e-3);
}

TEST_CASE("bps static and ramp behavior") {
    auto c = make_pm8qam();
    const int B = 32, W = 64;
    auto syms = random_symbols(c, 4000, 9);

    SUBCASE("constant rotation within the quantization bound") {
        const double phi = 0.3;
        std::vector<Point4> rot(syms.size());
        for (std::size_t i = 0; i < syms.size(); ++i) {
            const cd r = std::polar(1.0, phi);
            const cd x = cd(syms[i][0], syms[i][1]) * r;
            const cd y = cd(syms[i][2], syms[i][3]) * r;
            rot[i] = {x.real(), x.imag(), y.real(), y.imag()};
        }
        auto res = bps(rot, c, B, W);
        CHECK(res.cycle_slips == 0);
        for (std::size_t i = W; i < res.phase.size(); ++i)
            CHECK(std::abs(res.phase[i] - phi) <= M_PI / (4.0 * B) + 1e-12);
        // de-rotated symbols demap to the transmitted points
        CHECK(tail_ber(c, res.symbols, syms, W) == 0.0);
    }

    SUBCASE("zero phase noise gives a flat trajectory") {
        auto res = bps(syms, c, B, W);
        for (double p : res.phase) CHECK(std::abs(p) <= M_PI / (4.0 * B) + 1e-12);
    }

    SUBCASE("slow ramp tracked with bounded lag") {
        const double slope = 1e-4;  // rad per symbol
        std::vector<Point4> rot(syms.size());
        for (std::size_t i = 0; i < syms.size(); ++i) {
            const cd r = std::polar(1.0, slope * static_cast<double>(i));
            const cd x = cd(syms[i][0], syms[i][1]) * r;
            const cd y = cd(syms[i][2], syms[i][3]) * r;
            rot[i] = {x.real(), x.imag(), y.real(), y.imag()};
        }
        auto res = bps(rot, c, B, W);
        for (std::size_t i = W; i < res.phase.size(); ++i) {
            const double truth = slope * static_cast<double>(i);
            // worst case: estimate of the phase W symbols ago plus quantization
            CHECK(std::abs(res.phase[i] - truth) <= slope * W + M_PI / (4.0 * B) + 1e-12);
        }
    }
}

TEST_CASE("synchronize finds circular frame alignment") {
    auto c = make_2a8psk_6b(0.65);
    const std::size_t n = 8192;
    auto tx = random_symbols(c, n, 10);

    for (std::size_t shift : {std::size_t{12345 % n}, std::size_t{0}}) {
        std::vector<Point4> rx(n);
        for (std::size_t i = 0; i < n; ++i) rx[i] = tx[(i + shift) % n];
        auto res = synchronize(tx, rx);
        CHECK(res.found);
        CHECK(res.offset == shift);
    }

    // uncorrelated frames have no peak
    auto other = random_symbols(c, n, 11);
    auto res = synchronize(tx, other);
    CHECK_FALSE(res.found);

    CHECK_THROWS(synchronize(std::span(tx).subspan(0, 1024), std::span(tx).subspan(0, 1024)));
    CHECK_THROWS(synchronize(tx, std::span(tx).subspan(0, 4096)));
}

TEST_CASE("loopback through one amplified span is error free") {
    auto c = load_constellation(std::string(FOURDSIM_DATA_DIR) + "/constellations/prs64.csv");
    const std::size_t n = 16384;
    auto syms = random_symbols(c, n, 12);
    auto wf = rrc_shape(syms, kRolloff, kSps, kSpan, kSymbolRate);
    set_average_power(wf, dbm_to_watts(3.0));

    FiberParams fiber;  // one 75 km span, gamma on
    auto prop = ssfm_propagate(wf, fiber, 1.0);
    AmplifierModel amp{15.0, 4.0};
    auto amped = amplify(prop, amp, 99, 1);

    auto comp = cd_compensate(amped, fiber.dispersion_ps_nm_km * fiber.length_km);
    auto mf = matched_filter(comp, kRolloff, kSps, kSpan);
    EqualizerState st;
    auto out = mimo_equalize(mf, c, st, std::span(syms).subspan(0, 8000));
    CHECK_FALSE(st.failed);
    CHECK(tail_ber(c, out, syms, 10000) == 0.0);
}
