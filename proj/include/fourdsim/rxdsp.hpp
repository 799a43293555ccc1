#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fourdsim/channel.hpp"
#include "fourdsim/constellation.hpp"

namespace fourdsim {

struct BpsConfig {
    int test_phase_count = 32;  // B, phases over [0, pi/2)
    int window = 64;            // W, causal sliding window
};

struct EqualizerState {
    int taps = 21;       // per butterfly branch, odd
    double mu = 5e-5;    // LMS step in decision-directed mode; training uses 50x
    BpsConfig bps;
    bool failed = false;  // set by mimo_equalize when taps did not settle
};

// Frequency-domain all-pass pair for accumulated dispersion D*L in ps/nm.
// cd_apply matches the fiber model's dispersion sign, cd_compensate is its
// exact inverse.
Waveform cd_apply(const Waveform& wf, double dispersion_ps_nm, double wavelength_nm = 1550.0);
Waveform cd_compensate(const Waveform& wf, double dispersion_ps_nm,
                       double wavelength_nm = 1550.0);

struct FreqOffsetResult {
    Waveform corrected;
    double offset_hz = 0.0;
    bool ambiguous = false;  // spectrum peak not unique / not significant
};

// Spectral-peak search on the 4th and 8th signal powers (whichever
// concentrates better), restricted to |f| <= max_offset_hz.
FreqOffsetResult freq_offset_recover(const Waveform& wf, double max_offset_hz);

// 2x2 butterfly LMS at 2 samples/symbol: data-aided over the training
// prefix, then decision-directed with joint-4D decisions and in-loop
// blind phase search. Returns phase-corrected soft symbol outputs
// (circular frame, one per two input samples).
std::vector<Point4> mimo_equalize(const Waveform& wf, const Constellation4D& c,
                                  EqualizerState& state, std::span<const Point4> training);

struct BpsResult {
    std::vector<Point4> symbols;  // de-rotated
    std::vector<double> phase;    // unwrapped trajectory, radians
    int cycle_slips = 0;          // jumps > 2*pi/B between adjacent symbols
};

// Stand-alone blind phase search over B test phases in [0, pi/2) with a
// causal window of W symbols; trajectory unwrapped from 0.
BpsResult bps(std::span<const Point4> symbols, const Constellation4D& c, int test_phase_count,
              int window);

struct SyncResult {
    std::size_t offset = 0;        // rx[n] aligns with tx[(n + offset) mod N]
    double peak_to_sidelobe = 0.0;
    bool found = false;            // peak > 5x RMS sidelobe
};

// Circular cross-correlation alignment of equal-length symbol frames.
SyncResult synchronize(std::span<const Point4> tx_symbols, std::span<const Point4> rx_symbols);

// rms error vector magnitude relative to the reference rms
double evm(std::span<const Point4> rx, std::span<const Point4> ref);

}  // namespace fourdsim
