#include "fourdsim/rxdsp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace fourdsim {

namespace {

constexpr double kLightSpeed = 299792458.0;

using cd = std::complex<double>;

Waveform cd_filter(const Waveform& wf, double dispersion_ps_nm, double wavelength_nm,
                   double sign) {
    if (wf.size() == 0 || dispersion_ps_nm == 0.0) return wf;
    const double lambda = wavelength_nm * 1e-9;
    const double d_total = dispersion_ps_nm * 1e-3;  // s/m
    const double beta2_l = -d_total * lambda * lambda / (2.0 * M_PI * kLightSpeed);  // s^2

    Waveform out = wf;
    fft_inplace(out.x, -1);
    fft_inplace(out.y, -1);
    const std::size_t n = out.size();
    const double df = wf.sample_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fk = (k < n / 2) ? k * df : (static_cast<double>(k) - n) * df;
        const double w = 2.0 * M_PI * fk;
        const cd h = std::polar(1.0, sign * -0.5 * beta2_l * w * w);
        out.x[k] *= h;
        out.y[k] *= h;
    }
    fft_inplace(out.x, 1);
    fft_inplace(out.y, 1);
    return out;
}

std::size_t nearest_index(const Constellation4D& c, const Point4& y) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const auto& p = c.point(j);
        double d = 0.0;
        for (int k = 0; k < 4; ++k) d += (y[k] - p[k]) * (y[k] - p[k]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

double nearest_distance(const Constellation4D& c, const cd& x, const cd& y) {
    double best = 1e300;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const auto& p = c.point(j);
        const double d = (x.real() - p[0]) * (x.real() - p[0]) +
                         (x.imag() - p[1]) * (x.imag() - p[1]) +
                         (y.real() - p[2]) * (y.real() - p[2]) +
                         (y.imag() - p[3]) * (y.imag() - p[3]);
        best = std::min(best, d);
    }
    return best;
}

// smallest common-rotation angle (pi/4 or pi/2) mapping the point set
// onto itself; 8PSK-ring formats repeat every pi/4 and the phase search
// must not straddle two equivalent minima
double rotation_symmetry_period(const Constellation4D& c) {
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& p = c.point(i);
        const cd rx = cd(p[0], p[1]) * std::polar(1.0, 0.25 * M_PI);
        const cd ry = cd(p[2], p[3]) * std::polar(1.0, 0.25 * M_PI);
        if (nearest_distance(c, rx, ry) > 1e-12) return 0.5 * M_PI;
    }
    return 0.25 * M_PI;
}

// causal sliding-window phase search shared by bps() and the equalizer
class PhaseSearch {
public:
    PhaseSearch(const Constellation4D& c, int B, int W, double period = 0.5 * M_PI)
        : c_(c), B_(B), W_(W), period_(period), sums_(B, 0.0), hist_(0) {
        if (B < 8) throw std::invalid_argument("bps: test_phase_count must be >= 8");
        if (W < 1) throw std::invalid_argument("bps: window must be >= 1");
        rot_.resize(B);
        for (int b = 0; b < B; ++b) rot_[b] = std::polar(1.0, -phase_of(b));
    }

    double phase_of(int b) const { return b * period_ / B_; }

    // feed one symbol, return the unwrapped phase estimate
    double update(const cd& x, const cd& y) {
        std::vector<double> d(B_);
        for (int b = 0; b < B_; ++b) d[b] = nearest_distance(c_, x * rot_[b], y * rot_[b]);
        for (int b = 0; b < B_; ++b) sums_[b] += d[b];
        hist_.push_back(std::move(d));
        if (static_cast<int>(hist_.size()) > W_) {
            for (int b = 0; b < B_; ++b) sums_[b] -= hist_.front()[b];
            hist_.pop_front();
        }
        const int best =
            static_cast<int>(std::min_element(sums_.begin(), sums_.end()) - sums_.begin());
        // unwrap across the period ambiguity toward the previous estimate
        const double raw = phase_of(best);
        const double k = std::round((prev_ - raw) / period_);
        double est = raw + k * period_;
        if (std::abs(est - prev_) > 4.0 * period_ / B_ && !first_) ++cycle_slips_;
        first_ = false;
        prev_ = est;
        return est;
    }

    // training defines the absolute phase; restart the unwrap there
    void anchor() {
        prev_ = 0.0;
        first_ = true;
    }

    int cycle_slips() const { return cycle_slips_; }

private:
    const Constellation4D& c_;
    int B_;
    int W_;
    double period_;
    std::vector<cd> rot_;
    std::vector<double> sums_;
    std::deque<std::vector<double>> hist_;
    double prev_ = 0.0;
    bool first_ = true;
    int cycle_slips_ = 0;
};

}  // namespace

Waveform cd_apply(const Waveform& wf, double dispersion_ps_nm, double wavelength_nm) {
    return cd_filter(wf, dispersion_ps_nm, wavelength_nm, 1.0);
}

Waveform cd_compensate(const Waveform& wf, double dispersion_ps_nm, double wavelength_nm) {
    return cd_filter(wf, dispersion_ps_nm, wavelength_nm, -1.0);
}

FreqOffsetResult freq_offset_recover(const Waveform& wf, double max_offset_hz) {
    const std::size_t n = wf.size();
    if (n == 0) throw std::invalid_argument("freq_offset_recover: empty waveform");

    double best_offset = 0.0;
    double best_ratio = 0.0;
    bool any = false;
    for (const int power : {4, 8}) {
        std::vector<cd> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            cd px = wf.x[i], py = wf.y[i];
            cd ax = px, ay = py;
            for (int p = 1; p < power; ++p) {
                ax *= px;
                ay *= py;
            }
            v[i] = ax + ay;
        }
        fft_inplace(v, -1);
        std::vector<double> mag(n);
        for (std::size_t i = 0; i < n; ++i) mag[i] = std::norm(v[i]);

        const double df = wf.sample_rate / static_cast<double>(n);
        const double fmax = std::min(max_offset_hz * power, wf.sample_rate / 2.0 - df);
        const auto freq_of = [&](std::size_t k) {
            return (k < n / 2) ? k * df : (static_cast<double>(k) - n) * df;
        };

        std::size_t peak = 0;
        double peak_v = -1.0;
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (std::abs(freq_of(k)) > fmax) continue;
            ++count;
            sum += mag[k];
            sum2 += mag[k] * mag[k];
            if (mag[k] > peak_v) {
                peak_v = mag[k];
                peak = k;
            }
        }
        if (count < 3) continue;
        const double rms = std::sqrt(sum2 / count);
        const double ratio = peak_v / std::max(rms, 1e-300);

        // parabolic interpolation over the log-magnitude
        const std::size_t km = (peak + n - 1) % n, kp = (peak + 1) % n;
        const double lm = std::log(std::max(mag[km], 1e-300));
        const double l0 = std::log(std::max(mag[peak], 1e-300));
        const double lp = std::log(std::max(mag[kp], 1e-300));
        double delta = 0.0;
        const double denom = lm - 2.0 * l0 + lp;
        if (std::abs(denom) > 1e-12) delta = 0.5 * (lm - lp) / denom;
        const double f_est = (freq_of(peak) + delta * df) / power;

        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_offset = f_est;
            any = true;
        }
    }

    FreqOffsetResult res;
    res.offset_hz = best_offset;
    res.ambiguous = !any || best_ratio < 25.0 || std::abs(best_offset) > max_offset_hz;
    res.corrected = wf;
    const double w = -2.0 * M_PI * best_offset / wf.sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
        const cd r = std::polar(1.0, w * static_cast<double>(i));
        res.corrected.x[i] *= r;
        res.corrected.y[i] *= r;
    }
    res.corrected.center_frequency_offset = wf.center_frequency_offset - best_offset;
    return res;
}

std::vector<Point4> mimo_equalize(const Waveform& wf, const Constellation4D& c,
                                  EqualizerState& state, std::span<const Point4> training) {
    if (state.taps < 1 || state.taps % 2 == 0)
        throw std::invalid_argument("mimo_equalize: tap count must be odd");
    if (wf.size() % 2 != 0)
        throw std::invalid_argument("mimo_equalize: waveform must hold 2 samples/symbol");
    const std::size_t L = wf.size();
    const std::size_t n_sym = L / 2;
    if (training.size() > n_sym)
        throw std::invalid_argument("mimo_equalize: training longer than frame");

    // normalize to unit average power so decisions live on the Es=1 grid
    const double p = average_power(wf);
    const double scale = p > 0.0 ? 1.0 / std::sqrt(p) : 1.0;
    std::vector<cd> sx(L), sy(L);
    for (std::size_t i = 0; i < L; ++i) {
        sx[i] = wf.x[i] * scale;
        sy[i] = wf.y[i] * scale;
    }

    const int T = state.taps;
    const int C = T / 2;
    std::vector<cd> hxx(T, 0.0), hxy(T, 0.0), hyx(T, 0.0), hyy(T, 0.0);
    hxx[C] = hyy[C] = 1.0;

    PhaseSearch search(c, state.bps.test_phase_count, state.bps.window,
                       rotation_symmetry_period(c));

    std::vector<Point4> out(n_sym);
    std::vector<cd> raw_x(n_sym), raw_y(n_sym);  // outputs before derotation
    std::vector<double> traj(n_sym, 0.0);
    std::vector<cd> in_x(T), in_y(T);
    std::deque<double> update_ratio;
    double ratio_sum = 0.0;

    for (std::size_t nsym = 0; nsym < n_sym; ++nsym) {
        for (int t = 0; t < T; ++t) {
            const std::size_t i = (2 * nsym + L + t - C) % L;
            in_x[t] = sx[i];
            in_y[t] = sy[i];
        }
        cd ux = 0.0, uy = 0.0;
        for (int t = 0; t < T; ++t) {
            ux += hxx[t] * in_x[t] + hxy[t] * in_y[t];
            uy += hyx[t] * in_x[t] + hyy[t] * in_y[t];
        }

        raw_x[nsym] = ux;
        raw_y[nsym] = uy;
        cd dx, dy;
        if (nsym < training.size()) {
            dx = {training[nsym][0], training[nsym][1]};
            dy = {training[nsym][2], training[nsym][3]};
            search.update(ux, uy);  // keep the window warm, anchored at phase 0
        } else {
            if (nsym == training.size()) search.anchor();
            const double phase = search.update(ux, uy);
            traj[nsym] = phase;
            const cd derot = std::polar(1.0, -phase);
            const cd zx = ux * derot, zy = uy * derot;
            const auto& dec = c.point(nearest_index(c, {zx.real(), zx.imag(), zy.real(), zy.imag()}));
            const cd rerot = std::polar(1.0, phase);
            dx = cd(dec[0], dec[1]) * rerot;
            dy = cd(dec[2], dec[3]) * rerot;
        }

        // gear shift: fast data-aided acquisition, slow decision-directed
        // tracking (phase dynamics are BPS's job)
        const double mu = nsym < training.size() ? 50.0 * state.mu : state.mu;
        const cd ex = dx - ux, ey = dy - uy;
        double in_e = 0.0, h_e = 0.0;
        for (int t = 0; t < T; ++t) {
            const cd cx = std::conj(in_x[t]), cy = std::conj(in_y[t]);
            hxx[t] += mu * ex * cx;
            hxy[t] += mu * ex * cy;
            hyx[t] += mu * ey * cx;
            hyy[t] += mu * ey * cy;
            in_e += std::norm(in_x[t]) + std::norm(in_y[t]);
            h_e += std::norm(hxx[t]) + std::norm(hxy[t]) + std::norm(hyx[t]) + std::norm(hyy[t]);
        }
        const double upd = mu * std::sqrt((std::norm(ex) + std::norm(ey)) * in_e);
        const double r = upd / std::max(std::sqrt(h_e), 1e-300);
        update_ratio.push_back(r);
        ratio_sum += r;
        if (update_ratio.size() > 1000) {
            ratio_sum -= update_ratio.front();
            update_ratio.pop_front();
        }
    }

    state.failed = update_ratio.empty() ||
                   ratio_sum / static_cast<double>(update_ratio.size()) >= 1e-4;

    // the causal estimate at time n reflects the phase near n - W/2, so
    // derotate the emitted symbols with half-window delay compensation
    const std::size_t half_w = static_cast<std::size_t>(state.bps.window) / 2;
    for (std::size_t nsym = 0; nsym < n_sym; ++nsym) {
        double phase = 0.0;
        if (nsym >= training.size()) phase = traj[std::min(nsym + half_w, n_sym - 1)];
        const cd derot = std::polar(1.0, -phase);
        const cd zx = raw_x[nsym] * derot, zy = raw_y[nsym] * derot;
        out[nsym] = {zx.real(), zx.imag(), zy.real(), zy.imag()};
    }
    return out;
}

BpsResult bps(std::span<const Point4> symbols, const Constellation4D& c, int test_phase_count,
              int window) {
    PhaseSearch search(c, test_phase_count, window);
    BpsResult res;
    res.symbols.resize(symbols.size());
    res.phase.resize(symbols.size());
    for (std::size_t n = 0; n < symbols.size(); ++n) {
        const cd x{symbols[n][0], symbols[n][1]};
        const cd y{symbols[n][2], symbols[n][3]};
        const double phase = search.update(x, y);
        const cd r = std::polar(1.0, -phase);
        const cd zx = x * r, zy = y * r;
        res.symbols[n] = {zx.real(), zx.imag(), zy.real(), zy.imag()};
        res.phase[n] = phase;
    }
    res.cycle_slips = search.cycle_slips();
    return res;
}

SyncResult synchronize(std::span<const Point4> tx_symbols, std::span<const Point4> rx_symbols) {
    const std::size_t n = tx_symbols.size();
    if (n != rx_symbols.size())
        throw std::invalid_argument("synchronize: frames must have equal length");
    if (n < 4096) throw std::invalid_argument("synchronize: need at least 4096 symbols");

    // corr(tau) = sum_n <tx[n+tau], rx[n]> over both polarizations via FFT
    std::vector<cd> tx(n), rx(n);
    for (std::size_t i = 0; i < n; ++i) {
        // stack the two polarizations into one complex sequence pair
        tx[i] = cd(tx_symbols[i][0], tx_symbols[i][1]);
        rx[i] = cd(rx_symbols[i][0], rx_symbols[i][1]);
    }
    std::vector<cd> txy(n), rxy(n);
    for (std::size_t i = 0; i < n; ++i) {
        txy[i] = cd(tx_symbols[i][2], tx_symbols[i][3]);
        rxy[i] = cd(rx_symbols[i][2], rx_symbols[i][3]);
    }
    fft_inplace(tx, -1);
    fft_inplace(rx, -1);
    fft_inplace(txy, -1);
    fft_inplace(rxy, -1);
    std::vector<cd> prod(n);
    for (std::size_t i = 0; i < n; ++i)
        prod[i] = tx[i] * std::conj(rx[i]) + txy[i] * std::conj(rxy[i]);
    fft_inplace(prod, 1);

    std::size_t peak = 0;
    double peak_v = -1.0;
    double sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::abs(prod[i]);
        sum2 += m * m;
        if (m > peak_v) {
            peak_v = m;
            peak = i;
        }
    }
    const double side_rms = std::sqrt(std::max(0.0, sum2 - peak_v * peak_v) /
                                      static_cast<double>(n - 1));
    SyncResult res;
    res.offset = peak;
    res.peak_to_sidelobe = peak_v / std::max(side_rms, 1e-300);
    res.found = res.peak_to_sidelobe > 5.0;
    return res;
}

double evm(std::span<const Point4> rx, std::span<const Point4> ref) {
    if (rx.size() != ref.size()) throw std::invalid_argument("evm: length mismatch");
    double err = 0.0, pow = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i)
        for (int k = 0; k < 4; ++k) {
            err += (rx[i][k] - ref[i][k]) * (rx[i][k] - ref[i][k]);
            pow += ref[i][k] * ref[i][k];
        }
    if (pow == 0.0) throw std::invalid_argument("evm: zero reference power");
    return std::sqrt(err / pow);
}

}  // namespace fourdsim
