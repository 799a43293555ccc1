#include "fourdsim/channel.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fourdsim/rng.hpp"

namespace fourdsim {

namespace {

constexpr double kPlanck = 6.62607015e-34;     // J s
constexpr double kLightSpeed = 299792458.0;    // m/s
constexpr double kLn10 = 2.302585092994046;

std::complex<double>* as_fftw(std::vector<std::complex<double>>& v) {
    return v.data();
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& v, int sign) {
    const int n = static_cast<int>(v.size());
    fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(as_fftw(v)),
                                      reinterpret_cast<fftw_complex*>(as_fftw(v)),
                                      sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    if (sign > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& z : v) z *= inv;
    }
}

double FiberParams::beta2_s2_per_m() const {
    const double lambda = reference_wavelength_nm * 1e-9;          // m
    const double d = dispersion_ps_nm_km * 1e-6;                   // s/m^2
    return -d * lambda * lambda / (2.0 * M_PI * kLightSpeed);
}

double AmplifierModel::ase_psd_w_per_hz(double wavelength_nm) const {
    const double nu = kLightSpeed / (wavelength_nm * 1e-9);
    const double g = std::pow(10.0, gain_db / 10.0);
    const double f = std::pow(10.0, noise_figure_db / 10.0);
    return 0.5 * kPlanck * nu * std::max(0.0, g * f - 1.0);
}

std::vector<Point4> awgn_symbols(std::span<const Point4> symbols, SnrPoint snr,
                                 std::uint64_t seed) {
    const double sigma = std::sqrt(noise_sigma2_per_dim(snr.snr_db));
    const rng::Stream noise{seed, 0x4157474eULL};
    std::vector<Point4> out(symbols.size());
    for (std::size_t n = 0; n < symbols.size(); ++n) {
        const auto z01 = noise.gaussian_pair(2 * n);
        const auto z23 = noise.gaussian_pair(2 * n + 1);
        out[n] = {symbols[n][0] + sigma * z01.real(), symbols[n][1] + sigma * z01.imag(),
                  symbols[n][2] + sigma * z23.real(), symbols[n][3] + sigma * z23.imag()};
    }
    return out;
}

std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols) {
    if (sps < 2) throw std::invalid_argument("rrc_taps: sps must be >= 2");
    if (span_symbols < 1) throw std::invalid_argument("rrc_taps: span_symbols must be >= 1");
    const int n_taps = sps * span_symbols + 1;  // odd when sps*span is even
    std::vector<double> h(n_taps);
    const double b = rolloff;
    for (int i = 0; i < n_taps; ++i) {
        const double t = (i - (n_taps - 1) / 2.0) / sps;  // in symbol periods
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 + b * (4.0 / M_PI - 1.0);
        } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
            const double a = M_PI / (4.0 * b);
            v = (b / std::sqrt(2.0)) *
                ((1.0 + 2.0 / M_PI) * std::sin(a) + (1.0 - 2.0 / M_PI) * std::cos(a));
        } else {
            const double num = std::sin(M_PI * t * (1.0 - b)) +
                               4.0 * b * t * std::cos(M_PI * t * (1.0 + b));
            const double den = M_PI * t * (1.0 - 16.0 * b * b * t * t);
            v = num / den;
        }
        h[i] = v;
    }
    double e = 0.0;
    for (double v : h) e += v * v;
    const double s = 1.0 / std::sqrt(e);
    for (auto& v : h) v *= s;
    return h;
}

namespace {

// circular convolution of v with real taps h (centered), via FFT
void circular_filter(std::vector<std::complex<double>>& v, const std::vector<double>& h) {
    const std::size_t n = v.size();
    std::vector<std::complex<double>> hz(n, 0.0);
    const int half = static_cast<int>(h.size() - 1) / 2;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const long pos = (static_cast<long>(i) - half + 2 * static_cast<long>(n)) %
                         static_cast<long>(n);
        hz[pos] += h[i];
    }
    fft_inplace(v, -1);
    fft_inplace(hz, -1);
    for (std::size_t i = 0; i < n; ++i) v[i] *= hz[i];
    fft_inplace(v, +1);
}

}  // namespace

Waveform rrc_shape(std::span<const Point4> symbols, double rolloff, int sps,
                   int span_symbols, double symbol_rate) {
    const auto h = rrc_taps(rolloff, sps, span_symbols);
    const std::size_t n = symbols.size() * sps;
    Waveform wf;
    wf.sample_rate = symbol_rate * sps;
    wf.x.assign(n, 0.0);
    wf.y.assign(n, 0.0);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        wf.x[s * sps] = {symbols[s][0], symbols[s][1]};
        wf.y[s * sps] = {symbols[s][2], symbols[s][3]};
    }
    circular_filter(wf.x, h);
    circular_filter(wf.y, h);
    // scale so that average waveform power equals mean symbol energy
    const double g = std::sqrt(static_cast<double>(sps));
    for (auto& z : wf.x) z *= g;
    for (auto& z : wf.y) z *= g;
    return wf;
}

std::vector<Point4> matched_filter_downsample(const Waveform& wf, double rolloff, int sps,
                                              int span_symbols) {
    const auto h = rrc_taps(rolloff, sps, span_symbols);
    std::vector<std::complex<double>> x = wf.x, y = wf.y;
    circular_filter(x, h);
    circular_filter(y, h);
    const std::size_t n_sym = wf.size() / sps;
    std::vector<Point4> out(n_sym);
    const double g = 1.0 / std::sqrt(static_cast<double>(sps));
    for (std::size_t s = 0; s < n_sym; ++s) {
        const auto cx = x[s * sps] * g;
        const auto cy = y[s * sps] * g;
        out[s] = {cx.real(), cx.imag(), cy.real(), cy.imag()};
    }
    return out;
}

Waveform matched_filter(const Waveform& wf, double rolloff, int sps, int span_symbols) {
    const auto h = rrc_taps(rolloff, sps, span_symbols);
    Waveform out = wf;
    circular_filter(out.x, h);
    circular_filter(out.y, h);
    const double g = 1.0 / std::sqrt(static_cast<double>(sps));
    for (auto& z : out.x) z *= g;
    for (auto& z : out.y) z *= g;
    return out;
}

double average_power(const Waveform& wf) {
    double p = 0.0;
    for (const auto& z : wf.x) p += std::norm(z);
    for (const auto& z : wf.y) p += std::norm(z);
    return wf.size() ? p / static_cast<double>(wf.size()) : 0.0;
}

void set_average_power(Waveform& wf, double watts) {
    const double p = average_power(wf);
    if (p <= 0.0) throw std::invalid_argument("set_average_power: zero-power waveform");
    const double g = std::sqrt(watts / p);
    for (auto& z : wf.x) z *= g;
    for (auto& z : wf.y) z *= g;
}

Waveform ssfm_propagate(const Waveform& wf, const FiberParams& fiber, double step_km) {
    if (!(step_km > 0.0)) throw std::invalid_argument("ssfm_propagate: step must be > 0");
    if (step_km > fiber.length_km)
        throw std::invalid_argument("ssfm_propagate: step larger than span");
    const std::size_t n = wf.size();
    const int n_steps = static_cast<int>(std::ceil(fiber.length_km / step_km - 1e-12));
    const double dz = fiber.length_km * 1000.0 / n_steps;  // m
    const double beta2 = fiber.beta2_s2_per_m();
    const double alpha_np_per_m = fiber.alpha_db_per_km * kLn10 / 10.0 / 1000.0;
    const double gamma = fiber.gamma_per_w_km * 1e-3;  // 1/(W m)
    const double nl_factor = 8.0 / 9.0;

    // half-step linear operator in frequency domain
    std::vector<std::complex<double>> hlin(n);
    const double df = wf.sample_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fk = (k < n / 2) ? k * df : (static_cast<double>(k) - n) * df;
        const double w = 2.0 * M_PI * fk;
        const double phase = -0.5 * beta2 * w * w * (dz / 2.0);
        const double att = std::exp(-0.5 * alpha_np_per_m * (dz / 2.0));
        hlin[k] = std::polar(att, phase);
    }

    Waveform out = wf;
    auto linear_half = [&](std::vector<std::complex<double>>& v) {
        fft_inplace(v, -1);
        for (std::size_t k = 0; k < n; ++k) v[k] *= hlin[k];
        fft_inplace(v, +1);
    };
    for (int s = 0; s < n_steps; ++s) {
        linear_half(out.x);
        linear_half(out.y);
        if (gamma != 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::norm(out.x[i]) + std::norm(out.y[i]);
                const std::complex<double> rot = std::polar(1.0, gamma * nl_factor * p * dz);
                out.x[i] *= rot;
                out.y[i] *= rot;
            }
        }
        linear_half(out.x);
        linear_half(out.y);
    }
    return out;
}

Waveform amplify(const Waveform& wf, const AmplifierModel& amp, std::uint64_t seed,
                 std::uint64_t stream) {
    const double g = std::pow(10.0, amp.gain_db / 20.0);  // field gain
    const double psd = amp.ase_psd_w_per_hz();
    const double var_c = psd * wf.sample_rate;  // complex variance per pol
    const double s = std::sqrt(var_c / 2.0);
    const rng::Stream noise{seed, 0x41534500ULL ^ stream};
    Waveform out = wf;
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = out.x[i] * g + s * noise.gaussian_pair(2 * i);
        out.y[i] = out.y[i] * g + s * noise.gaussian_pair(2 * i + 1);
    }
    return out;
}

void run_loop(const Waveform& wf, const FiberParams& fiber, const AmplifierModel& amp,
              const LoopConfig& loop, std::uint64_t seed,
              const std::function<void(int, const Waveform&)>& on_checkpoint, double step_km) {
    if (loop.spans_per_circulation <= 0 || loop.circulations <= 0)
        throw std::invalid_argument("run_loop: counts must be positive");
    Waveform cur = wf;
    set_average_power(cur, dbm_to_watts(loop.launch_power_dbm));
    const double p0 = average_power(cur);

    const double dz = std::min(step_km, fiber.length_km);
    for (int c = 0; c < loop.circulations; ++c) {
        for (int s = 0; s < loop.spans_per_circulation; ++s) {
            cur = ssfm_propagate(cur, fiber, dz);
            const std::uint64_t stream =
                static_cast<std::uint64_t>(c) * loop.spans_per_circulation + s + 1;
            cur = amplify(cur, amp, seed, stream);
        }
        // ideal gain flattening: exact power renormalization
        set_average_power(cur, p0);
        if (on_checkpoint) on_checkpoint(c, cur);
    }
}

std::vector<Waveform> run_loop_collect(const Waveform& wf, const FiberParams& fiber,
                                       const AmplifierModel& amp, const LoopConfig& loop,
                                       std::uint64_t seed, double step_km) {
    std::vector<Waveform> checkpoints;
    checkpoints.reserve(loop.circulations);
    run_loop(wf, fiber, amp, loop, seed,
             [&](int, const Waveform& w) { checkpoints.push_back(w); }, step_km);
    return checkpoints;
}

void save_waveform(const std::string& path, const Waveform& wf) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_waveform: cannot open " + path);
    const std::uint32_t magic = 0x46345746u;  // 'F4WF'
    const std::uint32_t version = 1;
    const std::uint64_t len = wf.size();
    f.write(reinterpret_cast<const char*>(&magic), 4);
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&wf.sample_rate), 8);
    f.write(reinterpret_cast<const char*>(&len), 8);
    auto write_pol = [&](const std::vector<std::complex<double>>& v) {
        for (const auto& z : v) {
            const float re = static_cast<float>(z.real());
            const float im = static_cast<float>(z.imag());
            f.write(reinterpret_cast<const char*>(&re), 4);
            f.write(reinterpret_cast<const char*>(&im), 4);
        }
    };
    write_pol(wf.x);
    write_pol(wf.y);
    if (!f) throw std::runtime_error("save_waveform: write failure on " + path);
}

Waveform load_waveform(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_waveform: cannot open " + path);
    std::uint32_t magic = 0, version = 0;
    std::uint64_t len = 0;
    Waveform wf;
    f.read(reinterpret_cast<char*>(&magic), 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&wf.sample_rate), 8);
    f.read(reinterpret_cast<char*>(&len), 8);
    if (!f || magic != 0x46345746u || version != 1)
        throw std::runtime_error("load_waveform: bad header in " + path);
    auto read_pol = [&](std::vector<std::complex<double>>& v) {
        v.resize(len);
        for (auto& z : v) {
            float re = 0, im = 0;
            f.read(reinterpret_cast<char*>(&re), 4);
            f.read(reinterpret_cast<char*>(&im), 4);
            z = {re, im};
        }
    };
    read_pol(wf.x);
    read_pol(wf.y);
    if (!f) throw std::runtime_error("load_waveform: truncated file " + path);
    return wf;
}

Waveform wdm_multiplex(std::span<const Waveform> channels, std::span<const double> offsets_hz,
                       std::span<const std::size_t> circular_delays) {
    if (channels.empty() || channels.size() != offsets_hz.size() ||
        channels.size() != circular_delays.size())
        throw std::invalid_argument("wdm_multiplex: size mismatch");
    const std::size_t n = channels[0].size();
    Waveform out;
    out.sample_rate = channels[0].sample_rate;
    out.x.assign(n, 0.0);
    out.y.assign(n, 0.0);
    for (std::size_t ch = 0; ch < channels.size(); ++ch) {
        if (channels[ch].size() != n || channels[ch].sample_rate != out.sample_rate)
            throw std::invalid_argument("wdm_multiplex: channel grids differ");
        const double w = 2.0 * M_PI * offsets_hz[ch] / out.sample_rate;
        const std::size_t d = circular_delays[ch] % n;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + d) % n;
            const std::complex<double> rot = std::polar(1.0, w * static_cast<double>(i));
            out.x[i] += channels[ch].x[j] * rot;
            out.y[i] += channels[ch].y[j] * rot;
        }
    }
    return out;
}

}  // namespace fourdsim
