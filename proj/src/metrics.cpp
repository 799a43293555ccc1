#include "fourdsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fourdsim/rng.hpp"

namespace fourdsim {

namespace {

// exponents d_j = -||y - x_j||^2 / (2 sigma^2)
void fill_exponents(const Constellation4D& c, const Point4& y, double inv_2s2,
                    std::vector<double>& d) {
    const std::size_t n = c.size();
    d.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Point4& x = c.point(j);
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double t = y[k] - x[k];
            s += t * t;
        }
        d[j] = -s * inv_2s2;
    }
}

void llrs_for_symbol(const Constellation4D& c, const Point4& y, double inv_2s2, bool maxlog,
                     std::vector<double>& d, std::vector<double>& t, double* out) {
    const std::size_t n = c.size();
    const int m = c.bits_per_symbol();
    fill_exponents(c, y, inv_2s2, d);
    if (maxlog) {
        for (int i = 0; i < m; ++i) {
            double m0 = -INFINITY, m1 = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                if (c.label_bit(j, i))
                    m1 = std::max(m1, d[j]);
                else
                    m0 = std::max(m0, d[j]);
            }
            out[i] = m0 - m1;
        }
        return;
    }
    double dmax = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) dmax = std::max(dmax, d[j]);
    t.resize(n);
    for (std::size_t j = 0; j < n; ++j) t[j] = std::exp(d[j] - dmax);
    for (int i = 0; i < m; ++i) {
        double a0 = 0.0, a1 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (c.label_bit(j, i))
                a1 += t[j];
            else
                a0 += t[j];
        }
        if (a0 > 0.0 && a1 > 0.0) {
            out[i] = std::log(a0) - std::log(a1);
            continue;
        }
        // one side underflowed under the shared shift: per-set log-sum-exp
        double lse[2];
        for (int b = 0; b < 2; ++b) {
            double mx = -INFINITY;
            for (std::size_t j = 0; j < n; ++j)
                if (c.label_bit(j, i) == b) mx = std::max(mx, d[j]);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (c.label_bit(j, i) == b) s += std::exp(d[j] - mx);
            lse[b] = mx + std::log(s);
        }
        out[i] = lse[0] - lse[1];
    }
}

LlrFrame llr_common(const Constellation4D& c, std::span<const Point4> ys, double sigma2,
                    bool maxlog) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("llr: sigma2 must be > 0");
    const int m = c.bits_per_symbol();
    LlrFrame frame;
    frame.bits_per_symbol = m;
    frame.llrs.resize(ys.size() * m);
    const double inv_2s2 = 1.0 / (2.0 * sigma2);
    std::vector<double> d, t;
    for (std::size_t s = 0; s < ys.size(); ++s)
        llrs_for_symbol(c, ys[s], inv_2s2, maxlog, d, t, frame.llrs.data() + s * m);
    return frame;
}

}  // namespace

LlrFrame llr_exact(const Constellation4D& c, std::span<const Point4> ys, double sigma2) {
    return llr_common(c, ys, sigma2, false);
}

LlrFrame llr_maxlog(const Constellation4D& c, std::span<const Point4> ys, double sigma2) {
    return llr_common(c, ys, sigma2, true);
}

GmiEstimate gmi_from_llrs(std::span<const std::uint8_t> tx_bits, const LlrFrame& frame) {
    if (tx_bits.size() != frame.llrs.size())
        throw std::invalid_argument("gmi_from_llrs: bit/LLR length mismatch");
    const int m = frame.bits_per_symbol;
    const std::size_t n_sym = frame.symbol_count();
    const double inv_ln2 = 1.0 / std::log(2.0);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t s = 0; s < n_sym; ++s) {
        double loss = 0.0;
        for (int i = 0; i < m; ++i) {
            double l = frame.llrs[s * m + i];
            l = std::clamp(l, -kLlrClip, kLlrClip);
            const double sgn = tx_bits[s * m + i] ? -1.0 : 1.0;
            loss += std::log1p(std::exp(-sgn * l)) * inv_ln2;
        }
        sum += loss;
        sum2 += loss * loss;
    }
    GmiEstimate g;
    g.sample_count = n_sym;
    if (n_sym == 0) return g;
    const double mean = sum / static_cast<double>(n_sym);
    g.value = static_cast<double>(m) - mean;
    if (n_sym > 1) {
        const double var = std::max(0.0, (sum2 - sum * mean) / static_cast<double>(n_sym - 1));
        g.std_error = std::sqrt(var / static_cast<double>(n_sym));
    }
    return g;
}

double ngmi(const GmiEstimate& gmi, int m) {
    if (m <= 0) throw std::invalid_argument("ngmi: m must be > 0");
    return gmi.value / static_cast<double>(m);
}

std::vector<GmiCurvePoint> awgn_gmi_sweep(const Constellation4D& c,
                                          std::span<const double> snr_grid_db,
                                          std::size_t n_symbols, std::uint64_t seed) {
    if (snr_grid_db.empty()) throw std::invalid_argument("awgn_gmi_sweep: empty SNR grid");
    const int m = c.bits_per_symbol();
    const rng::Stream sym{seed, 0x53594d42ULL};   // symbol indices
    const rng::Stream noise{seed, 0x4e4f4953ULL}; // unit noise, shared across SNRs

    std::vector<GmiCurvePoint> curve;
    curve.reserve(snr_grid_db.size());
    std::vector<double> d, t, l(m);
    for (const double snr_db : snr_grid_db) {
        const double sigma2 = noise_sigma2_per_dim(snr_db);
        const double sigma = std::sqrt(sigma2);
        const double inv_2s2 = 1.0 / (2.0 * sigma2);
        const double inv_ln2 = 1.0 / std::log(2.0);

        double sum = 0.0, sum2 = 0.0;
        std::uint64_t bit_errors = 0;
        for (std::size_t s = 0; s < n_symbols; ++s) {
            const std::size_t idx = sym.integer(s, c.size());
            const std::uint32_t lab = c.label(idx);
            const auto z01 = noise.gaussian_pair(2 * s);
            const auto z23 = noise.gaussian_pair(2 * s + 1);
            const Point4& x = c.point(idx);
            const Point4 y{x[0] + sigma * z01.real(), x[1] + sigma * z01.imag(),
                           x[2] + sigma * z23.real(), x[3] + sigma * z23.imag()};
            llrs_for_symbol(c, y, inv_2s2, false, d, t, l.data());
            double loss = 0.0;
            for (int i = 0; i < m; ++i) {
                const int b = (lab >> (m - 1 - i)) & 1;
                const double li = std::clamp(l[i], -kLlrClip, kLlrClip);
                loss += std::log1p(std::exp(b ? li : -li)) * inv_ln2;
                const int hard = l[i] < 0.0 ? 1 : 0;
                if (hard != b) ++bit_errors;
            }
            sum += loss;
            sum2 += loss * loss;
        }
        GmiCurvePoint pt;
        pt.snr.snr_db = snr_db;
        pt.gmi.sample_count = n_symbols;
        const double mean = sum / static_cast<double>(n_symbols);
        pt.gmi.value = static_cast<double>(m) - mean;
        if (n_symbols > 1) {
            const double var =
                std::max(0.0, (sum2 - sum * mean) / static_cast<double>(n_symbols - 1));
            pt.gmi.std_error = std::sqrt(var / static_cast<double>(n_symbols));
        }
        pt.ber = static_cast<double>(bit_errors) / static_cast<double>(n_symbols * m);
        curve.push_back(pt);
    }
    return curve;
}

double interp_crossing(std::span<const double> xs, std::span<const double> ys, double target) {
    if (xs.size() != ys.size() || xs.size() < 1)
        throw std::invalid_argument("interp_crossing: bad input sizes");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i] == target) return xs[i];
        if (i + 1 < xs.size() && (ys[i] - target) * (ys[i + 1] - target) < 0.0) {
            const double f = (target - ys[i]) / (ys[i + 1] - ys[i]);
            return xs[i] + f * (xs[i + 1] - xs[i]);
        }
    }
    throw std::runtime_error("interp_crossing: target not bracketed by curve");
}

double required_snr_at(std::span<const GmiCurvePoint> curve, double threshold_bits) {
    std::vector<double> xs, ys;
    xs.reserve(curve.size());
    ys.reserve(curve.size());
    for (const auto& p : curve) {
        xs.push_back(p.snr.snr_db);
        ys.push_back(p.gmi.value);
    }
    return interp_crossing(xs, ys, threshold_bits);
}

BerCount ber_count(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits) {
    if (tx_bits.size() != rx_bits.size())
        throw std::invalid_argument("ber_count: length mismatch");
    BerCount r;
    r.total = tx_bits.size();
    for (std::size_t i = 0; i < tx_bits.size(); ++i)
        if ((tx_bits[i] != 0) != (rx_bits[i] != 0)) ++r.errors;
    r.ber = r.total ? static_cast<double>(r.errors) / static_cast<double>(r.total) : 0.0;
    return r;
}

}  // namespace fourdsim
