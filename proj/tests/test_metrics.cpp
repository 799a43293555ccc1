#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fourdsim/constellation.hpp"
#include "fourdsim/metrics.hpp"
#include "fourdsim/rng.hpp"

using namespace fourdsim;

namespace {

// Independent oracle: direct double-loop summation without log-sum-exp.
std::vector<double> llr_oracle(const Constellation4D& c, const Point4& y, double sigma2) {
    const int m = c.bits_per_symbol();
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i) {
        double a0 = 0.0, a1 = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            double d2 = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double t = y[k] - c.point(j)[k];
                d2 += t * t;
            }
            const double e = std::exp(-d2 / (2.0 * sigma2));
            if (c.label_bit(j, i))
                a1 += e;
            else
                a0 += e;
        }
        out[i] = std::log(a0) - std::log(a1);
    }
    return out;
}

Constellation4D bpsk_toy() {
    std::vector<Point4> pts{{1, 0, 0, 0}, {-1, 0, 0, 0}};
    return Constellation4D(pts, {0, 1}, "bpsk", 1);
}

}  // namespace

TEST_CASE("llr_exact matches direct-summation oracle") {
    auto c = make_pm8qam();
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd(0.0, 0.8);
    std::vector<Point4> ys(1000);
    for (auto& y : ys)
        for (auto& v : y) v = nd(gen);
    const double sigma2 = 0.5;
    auto frame = llr_exact(c, ys, sigma2);
    for (std::size_t s = 0; s < ys.size(); ++s) {
        auto ref = llr_oracle(c, ys[s], sigma2);
        for (int i = 0; i < 6; ++i)
            CHECK(frame.llrs[s * 6 + i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
    CHECK_THROWS(llr_exact(c, ys, 0.0));
    CHECK_THROWS(llr_maxlog(c, ys, -1.0));
}

TEST_CASE("llr sign convention and symmetry") {
    auto c = make_2a8psk_6b(0.6);
    // y on a constellation point with tiny noise: bits with value 0 get
    // large positive LLRs
    const std::size_t idx = 5;
    std::vector<Point4> ys{c.point(idx)};
    auto frame = llr_exact(c, ys, 1e-3);
    for (int i = 0; i < 6; ++i) {
        const double l = frame.llrs[i];
        if (c.label_bit(idx, i))
            CHECK(l < -10.0);
        else
            CHECK(l > 10.0);
    }

    // symmetric 2-point set, y at the midpoint -> LLR exactly 0
    auto toy = bpsk_toy();
    std::vector<Point4> mid{{0, 0, 0, 0}};
    CHECK(llr_exact(toy, mid, 0.3).llrs[0] == doctest::Approx(0.0));
    CHECK(llr_maxlog(toy, mid, 0.3).llrs[0] == doctest::Approx(0.0));
}

TEST_CASE("llr_maxlog near exact at tiny noise, sign agreement at 12 dB") {
    // tie-free random set so each bit has a unique dominant term
    std::mt19937_64 tg(11);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    std::vector<Point4> tpts(4);
    for (auto& p : tpts)
        for (auto& v : p) v = ud(tg);
    Constellation4D toy4(tpts, {0, 1, 2, 3}, "toy4", 2);
    std::vector<Point4> ys{toy4.point(2)};
    auto ex = llr_exact(toy4, ys, 1e-4);
    auto ml = llr_maxlog(toy4, ys, 1e-4);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(ex.llrs[i] - ml.llrs[i]) < 1e-9);

    auto c = make_pm8qam();

    // Monte-Carlo sign agreement at SNR 12 dB
    const double sigma2 = noise_sigma2_per_dim(12.0);
    const double sigma = std::sqrt(sigma2);
    rng::Stream noise{42, 1};
    rng::Stream sym{42, 2};
    std::vector<Point4> batch(2000);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& x = c.point(sym.integer(n, c.size()));
        const auto z01 = noise.gaussian_pair(2 * n);
        const auto z23 = noise.gaussian_pair(2 * n + 1);
        batch[n] = {x[0] + sigma * z01.real(), x[1] + sigma * z01.imag(),
                    x[2] + sigma * z23.real(), x[3] + sigma * z23.imag()};
    }
    auto fe = llr_exact(c, batch, sigma2);
    auto fm = llr_maxlog(c, batch, sigma2);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < fe.llrs.size(); ++i)
        if ((fe.llrs[i] >= 0) == (fm.llrs[i] >= 0)) ++agree;
    CHECK(static_cast<double>(agree) / fe.llrs.size() >= 0.99);
}

TEST_CASE("gmi_from_llrs limits") {
    LlrFrame zeros;
    zeros.bits_per_symbol = 6;
    zeros.llrs.assign(600, 0.0);
    std::vector<std::uint8_t> bits(600, 0);
    auto g = gmi_from_llrs(bits, zeros);
    CHECK(g.value == 0.0);  // log2(2) per bit, exactly

    LlrFrame perfect;
    perfect.bits_per_symbol = 6;
    perfect.llrs.resize(600);
    std::mt19937_64 gen(3);
    for (std::size_t i = 0; i < 600; ++i) {
        bits[i] = gen() & 1;
        perfect.llrs[i] = bits[i] ? -1e9 : 1e9;  // clipped to +-50 internally
    }
    g = gmi_from_llrs(bits, perfect);
    CHECK(std::abs(g.value - 6.0) < 1e-12);
    CHECK(g.std_error < 1e-12);

    std::vector<std::uint8_t> wrong(599);
    CHECK_THROWS(gmi_from_llrs(wrong, perfect));
}

TEST_CASE("ngmi") {
    CHECK(ngmi({5.1, 0.0, 1}, 6) == 0.85);
    CHECK(ngmi({0.0, 0.0, 1}, 6) == 0.0);
    CHECK(ngmi({6.0, 0.0, 1}, 6) == 1.0);
    CHECK_THROWS(ngmi({1.0, 0.0, 1}, 0));
}

TEST_CASE("awgn sweep saturation, monotonicity, determinism") {
    auto c = make_2a8psk_6b(0.65);
    std::vector<double> grid{8.0, 9.0, 10.0, 11.0, 30.0};
    auto curve = awgn_gmi_sweep(c, grid, 20000, 123);
    REQUIRE(curve.size() == grid.size());
    CHECK(curve.back().gmi.value == doctest::Approx(6.0).epsilon(0.02 / 6.0));
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double slack = 2.0 * (curve[i].gmi.std_error + curve[i + 1].gmi.std_error);
        CHECK(curve[i + 1].gmi.value >= curve[i].gmi.value - slack);
        CHECK(curve[i].gmi.value >= -3.0 * curve[i].gmi.std_error);
        CHECK(curve[i].gmi.value <= 6.0 + 3.0 * curve[i].gmi.std_error);
    }
    // bit determinism across reruns
    auto curve2 = awgn_gmi_sweep(c, grid, 20000, 123);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].gmi.value == curve2[i].gmi.value);
        CHECK(curve[i].ber == curve2[i].ber);
    }
    CHECK_THROWS(awgn_gmi_sweep(c, {}, 100, 1));

    // GMI(exact) >= GMI(maxlog) - 2 stderr at a mid SNR (mismatched decoding)
    const double snr = 9.0;
    const double sigma2 = noise_sigma2_per_dim(snr);
    const double sigma = std::sqrt(sigma2);
    rng::Stream noise{9, 1}, sym{9, 2};
    const std::size_t n = 20000;
    std::vector<Point4> ys(n);
    std::vector<std::uint8_t> bits(n * 6);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = sym.integer(s, c.size());
        const auto z01 = noise.gaussian_pair(2 * s);
        const auto z23 = noise.gaussian_pair(2 * s + 1);
        const auto& x = c.point(idx);
        ys[s] = {x[0] + sigma * z01.real(), x[1] + sigma * z01.imag(),
                 x[2] + sigma * z23.real(), x[3] + sigma * z23.imag()};
        for (int b = 0; b < 6; ++b) bits[s * 6 + b] = (c.label(idx) >> (5 - b)) & 1u;
    }
    auto ge = gmi_from_llrs(bits, llr_exact(c, ys, sigma2));
    auto gm = gmi_from_llrs(bits, llr_maxlog(c, ys, sigma2));
    CHECK(ge.value >= gm.value - 2.0 * (ge.std_error + gm.std_error));
}

TEST_CASE("required_snr_at interpolation") {
    std::vector<GmiCurvePoint> curve(2);
    curve[0].snr.snr_db = 10.0;
    curve[0].gmi.value = 5.0;
    curve[1].snr.snr_db = 11.0;
    curve[1].gmi.value = 5.2;
    CHECK(required_snr_at(curve, 5.1) == doctest::Approx(10.5));
    CHECK(required_snr_at(curve, 5.0) == doctest::Approx(10.0));  // on a grid point
    CHECK_THROWS(required_snr_at(curve, 5.5));                    // above curve max
}

TEST_CASE("ber_count") {
    std::vector<std::uint8_t> a(1000000, 0), b(1000000, 0);
    auto r = ber_count(a, b);
    CHECK(r.errors == 0);
    for (auto& v : b) v = 1;
    r = ber_count(a, b);
    CHECK(r.ber == 1.0);
    b.assign(1000000, 0);
    for (int i = 0; i < 100; ++i) b[i * 9973] = 1;
    r = ber_count(a, b);
    CHECK(r.errors == 100);
    CHECK(r.ber == doctest::Approx(1e-4));
    std::vector<std::uint8_t> shorter(10);
    CHECK_THROWS(ber_count(a, shorter));
}

TEST_CASE("awgn noise variance convention") {
    // empirical per-dimension variance at 10 dB -> 0.025 within 1%
    CHECK(noise_sigma2_per_dim(10.0) == doctest::Approx(0.025));
    rng::Stream noise{5, 0};
    double sum = 0.0, sum2 = 0.0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::sqrt(noise_sigma2_per_dim(10.0)) * noise.gaussian(i);
        sum += v;
        sum2 += v * v;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(0.025).epsilon(0.01));
}
