#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fourdsim/constellation.hpp"
#include "fourdsim/metrics.hpp"

namespace fourdsim {

struct Waveform {
    std::vector<std::complex<double>> x;  // X polarization, sqrt(W)
    std::vector<std::complex<double>> y;  // Y polarization
    double sample_rate = 0.0;             // Hz
    double center_frequency_offset = 0.0; // Hz

    std::size_t size() const { return x.size(); }
};

struct FiberParams {
    double length_km = 75.0;
    double alpha_db_per_km = 0.20;
    double dispersion_ps_nm_km = 17.0;
    double gamma_per_w_km = 1.3;
    double reference_wavelength_nm = 1550.0;

    // beta2 in s^2/m from D
    double beta2_s2_per_m() const;
};

struct AmplifierModel {
    double gain_db = 15.0;
    double noise_figure_db = 5.0;  // Raman-hybrid equivalent default: 3.0

    bool below_quantum_limit() const { return noise_figure_db < 3.0; }
    // per-polarization ASE PSD in W/Hz: (h nu / 2) * (G*F - 1)
    double ase_psd_w_per_hz(double wavelength_nm = 1550.0) const;
};

struct LoopConfig {
    int spans_per_circulation = 1;
    int circulations = 1;
    double launch_power_dbm = 0.0;
};

// Symbol-level AWGN at the shared SNR convention (sigma^2 per real
// dimension = 1/(4 * 10^(snr/10)), Es = 1).
std::vector<Point4> awgn_symbols(std::span<const Point4> symbols, SnrPoint snr,
                                 std::uint64_t seed);

// Unit-energy root-raised-cosine taps, odd count sps*span_symbols+1.
std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols);

// Upsample + RRC filter as a circular frame; sample_rate = symbol_rate*sps.
// Output average power equals the mean symbol energy (Es=1 -> 1 W scale).
Waveform rrc_shape(std::span<const Point4> symbols, double rolloff, int sps,
                   int span_symbols, double symbol_rate);

// Matched RRC filter keeping the sample rate (circular); feeds the
// fractionally spaced equalizer.
Waveform matched_filter(const Waveform& wf, double rolloff, int sps, int span_symbols);

// Matched RRC filter and symbol-rate decimation (circular).
std::vector<Point4> matched_filter_downsample(const Waveform& wf, double rolloff, int sps,
                                              int span_symbols);

double average_power(const Waveform& wf);        // W, both polarizations
void set_average_power(Waveform& wf, double watts);
inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

// Symmetric split-step Manakov propagation (8/9 factor, no PMD).
Waveform ssfm_propagate(const Waveform& wf, const FiberParams& fiber, double step_km);

Waveform amplify(const Waveform& wf, const AmplifierModel& amp, std::uint64_t seed,
                 std::uint64_t stream = 0);

// Recirculating loop: spans_per_circulation x (fiber + amplifier), then
// exact power renormalization (ideal gain flattening). Invokes the
// callback once per circulation; noise is indexed by (circulation, span)
// so checkpoint granularity cannot change the realization.
void run_loop(const Waveform& wf, const FiberParams& fiber, const AmplifierModel& amp,
              const LoopConfig& loop, std::uint64_t seed,
              const std::function<void(int circulation, const Waveform&)>& on_checkpoint,
              double step_km = 1.0);

std::vector<Waveform> run_loop_collect(const Waveform& wf, const FiberParams& fiber,
                                       const AmplifierModel& amp, const LoopConfig& loop,
                                       std::uint64_t seed, double step_km = 1.0);

// Binary checkpoint file: little-endian header {magic 'F4WF', version u32,
// sample_rate f64, length u64}, then X then Y as interleaved complex64.
void save_waveform(const std::string& path, const Waveform& wf);
Waveform load_waveform(const std::string& path);

// in-place circular FFT helpers (sign -1 forward)
void fft_inplace(std::vector<std::complex<double>>& v, int sign);

// Sum of frequency-shifted copies (50-GHz-grid style multiplexing); each
// channel may be circularly delayed for decorrelation.
Waveform wdm_multiplex(std::span<const Waveform> channels, std::span<const double> offsets_hz,
                       std::span<const std::size_t> circular_delays);

}  // namespace fourdsim
