#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fourdsim/constellation.hpp"

namespace fourdsim {

// SNR convention used everywhere: Es/N0 per 4D symbol with Es = 1 and
// N0 = 4 sigma^2, sigma^2 the noise variance per real dimension.
inline double noise_sigma2_per_dim(double snr_db) {
    return 0.25 * std::pow(10.0, -snr_db / 10.0);
}

// Per-polarization (2D) SNR in dB for the same channel; with Es split
// evenly over both polarizations the two definitions coincide.
inline double snr_per_polarization_db(double snr_4d_db) { return snr_4d_db; }

// LLR clip magnitude applied before GMI accumulation.
inline constexpr double kLlrClip = 50.0;

// Sign convention: L > 0 favors bit value 0.
struct LlrFrame {
    std::vector<double> llrs;  // m per symbol, symbol-major
    int bits_per_symbol = 0;
    std::size_t symbol_count() const {
        return bits_per_symbol ? llrs.size() / bits_per_symbol : 0;
    }
};

struct GmiEstimate {
    double value = 0.0;      // bits per 4D symbol
    double std_error = 0.0;  // bits
    std::size_t sample_count = 0;
};

struct SnrPoint {
    double snr_db;
};

LlrFrame llr_exact(const Constellation4D& c, std::span<const Point4> ys, double sigma2);
LlrFrame llr_maxlog(const Constellation4D& c, std::span<const Point4> ys, double sigma2);

GmiEstimate gmi_from_llrs(std::span<const std::uint8_t> tx_bits, const LlrFrame& llrs);

double ngmi(const GmiEstimate& gmi, int m);

struct GmiCurvePoint {
    SnrPoint snr;
    GmiEstimate gmi;
    double ber;  // hard-decision (LLR sign) pre-FEC BER
};

std::vector<GmiCurvePoint> awgn_gmi_sweep(const Constellation4D& c,
                                          std::span<const double> snr_grid_db,
                                          std::size_t n_symbols, std::uint64_t seed);

// Linear interpolation in (dB, bits); throws if the curve does not
// bracket the threshold.
double required_snr_at(std::span<const GmiCurvePoint> curve, double threshold_bits);

// Generic monotone crossing: first bracketing interval scanning left to
// right; ys may be increasing or decreasing in x.
double interp_crossing(std::span<const double> xs, std::span<const double> ys, double target);

struct BerCount {
    std::uint64_t errors = 0;
    std::uint64_t total = 0;
    double ber = 0.0;
};

BerCount ber_count(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits);

}  // namespace fourdsim
