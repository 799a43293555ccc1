#include "fourdsim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "fourdsim/metrics.hpp"
#include "fourdsim/rng.hpp"

namespace fourdsim {

namespace {

// log(1 + exp(-x)) without overflow
double softplus_neg(double x) {
    if (x >= 0.0) return std::log1p(std::exp(-x));
    return -x + std::log1p(std::exp(x));
}

struct McBatch {
    std::vector<std::uint32_t> idx;  // transmitted point index per sample
    std::vector<Point4> noise;       // sigma-scaled noise per sample
    double sigma2 = 0.0;             // per real dimension
};

McBatch make_batch(std::size_t n_points, const OptimizerConfig& cfg) {
    McBatch b;
    b.sigma2 = noise_sigma2_per_dim(cfg.target_snr_db);
    const double sigma = std::sqrt(b.sigma2);
    const rng::Stream sym{cfg.seed, 0x4f505453ULL};
    const rng::Stream noi{cfg.seed, 0x4f50544eULL};
    b.idx.resize(cfg.n_mc_symbols);
    b.noise.resize(cfg.n_mc_symbols);
    for (int n = 0; n < cfg.n_mc_symbols; ++n) {
        b.idx[n] = static_cast<std::uint32_t>(sym.integer(n, n_points));
        const auto g1 = noi.gaussian_pair(2 * static_cast<std::uint64_t>(n));
        const auto g2 = noi.gaussian_pair(2 * static_cast<std::uint64_t>(n) + 1);
        b.noise[n] = {sigma * g1.real(), sigma * g1.imag(), sigma * g2.real(),
                      sigma * g2.imag()};
    }
    return b;
}

struct GmiValue {
    double gmi = 0.0;
    double std_error = 0.0;
};

// Batch GMI over the reparameterized samples y_n = x[idx_n] + noise_n.
// When grad is non-null, also accumulates d(gmi)/d(coordinates) including
// the dependence of y_n on the transmitted point.
GmiValue eval_batch(const std::vector<Point4>& pts, const std::vector<std::uint32_t>& labels,
                    int m, const McBatch& batch, std::vector<double>* grad) {
    const std::size_t M = pts.size();
    const std::size_t N = batch.idx.size();
    const double inv_2s2 = 0.5 / batch.sigma2;
    if (grad) grad->assign(4 * M, 0.0);

    std::vector<double> a(M), e(M);
    std::vector<Point4> d(M);
    std::vector<double> s0(m), s1(m), llr(m), w(m);
    double sum = 0.0, sum2 = 0.0;

    for (std::size_t n = 0; n < N; ++n) {
        const std::uint32_t k = batch.idx[n];
        Point4 y;
        for (int c = 0; c < 4; ++c) y[c] = pts[k][c] + batch.noise[n][c];

        double amax = -1e300;
        for (std::size_t j = 0; j < M; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 4; ++c) {
                d[j][c] = y[c] - pts[j][c];
                d2 += d[j][c] * d[j][c];
            }
            a[j] = -d2 * inv_2s2;
            amax = std::max(amax, a[j]);
        }
        for (std::size_t j = 0; j < M; ++j) e[j] = std::exp(a[j] - amax);

        std::fill(s0.begin(), s0.end(), 0.0);
        std::fill(s1.begin(), s1.end(), 0.0);
        for (std::size_t j = 0; j < M; ++j)
            for (int i = 0; i < m; ++i)
                ((labels[j] >> (m - 1 - i)) & 1u ? s1[i] : s0[i]) += e[j];

        double f = m;
        for (int i = 0; i < m; ++i) {
            if (s0[i] > 0.0 && s1[i] > 0.0) {
                llr[i] = std::log(s0[i]) - std::log(s1[i]);
            } else {
                // one bit set underflowed under the shared shift; redo that
                // side with its own max
                const int empty = s0[i] > 0.0 ? 1 : 0;
                double side_max = -1e300;
                for (std::size_t j = 0; j < M; ++j)
                    if (static_cast<int>((labels[j] >> (m - 1 - i)) & 1u) == empty)
                        side_max = std::max(side_max, a[j]);
                double side_sum = 0.0;
                for (std::size_t j = 0; j < M; ++j)
                    if (static_cast<int>((labels[j] >> (m - 1 - i)) & 1u) == empty)
                        side_sum += std::exp(a[j] - side_max);
                const double side_log = side_max + std::log(side_sum);
                llr[i] = empty == 1 ? (amax + std::log(s0[i])) - side_log
                                    : side_log - (amax + std::log(s1[i]));
            }
            const double sg = ((labels[k] >> (m - 1 - i)) & 1u) ? -1.0 : 1.0;
            f -= softplus_neg(sg * llr[i]) / M_LN2;
            w[i] = sg / ((1.0 + std::exp(sg * llr[i])) * M_LN2);
        }
        sum += f;
        sum2 += f * f;

        if (grad) {
            Point4 acc{0.0, 0.0, 0.0, 0.0};
            for (std::size_t j = 0; j < M; ++j) {
                double gj = 0.0;
                for (int i = 0; i < m; ++i) {
                    if ((labels[j] >> (m - 1 - i)) & 1u)
                        gj -= s1[i] > 0.0 ? w[i] / s1[i] : 0.0;
                    else
                        gj += s0[i] > 0.0 ? w[i] / s0[i] : 0.0;
                }
                const double coeff = gj * e[j] / batch.sigma2;
                for (int c = 0; c < 4; ++c) {
                    const double t = coeff * d[j][c];
                    (*grad)[4 * j + c] += t;
                    acc[c] += t;
                }
            }
            for (int c = 0; c < 4; ++c) (*grad)[4 * k + c] -= acc[c];
        }
    }

    GmiValue out;
    out.gmi = sum / N;
    const double var = std::max(0.0, sum2 / N - out.gmi * out.gmi);
    out.std_error = std::sqrt(var / N);
    if (grad)
        for (auto& g : *grad) g /= static_cast<double>(N);
    return out;
}

std::vector<double> fd_gradient(std::vector<Point4> pts, const std::vector<std::uint32_t>& labels,
                                int m, const McBatch& batch) {
    const double h = 1e-5;
    std::vector<double> grad(4 * pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j)
        for (int c = 0; c < 4; ++c) {
            const double orig = pts[j][c];
            pts[j][c] = orig + h;
            const double fp = eval_batch(pts, labels, m, batch, nullptr).gmi;
            pts[j][c] = orig - h;
            const double fm = eval_batch(pts, labels, m, batch, nullptr).gmi;
            pts[j][c] = orig;
            grad[4 * j + c] = (fp - fm) / (2.0 * h);
        }
    return grad;
}

void renormalize_energy(std::vector<Point4>& pts) {
    double mean = 0.0;
    for (const auto& p : pts)
        for (double v : p) mean += v * v;
    mean /= static_cast<double>(pts.size());
    const double scale = 1.0 / std::sqrt(mean);
    for (auto& p : pts)
        for (double& v : p) v *= scale;
}

void project_cm_points(std::vector<Point4>& pts) {
    for (auto& p : pts) {
        const double nrm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
        if (nrm < 1e-12) throw std::invalid_argument("project_constant_modulus: zero-norm point");
        for (double& v : p) v /= nrm;
    }
}

std::array<double, 3> unit_stokes(const Point4& p) {
    const auto st = to_stokes(to_jones(p));
    const double n = std::sqrt(st.s1 * st.s1 + st.s2 * st.s2 + st.s3 * st.s3);
    return {st.s1 / n, st.s2 / n, st.s3 / n};
}

// group points by state of polarization; returns per-point group index
std::vector<int> sop_groups(const std::vector<Point4>& pts, double tol, int max_groups) {
    std::vector<std::array<double, 3>> centers;
    std::vector<int> group(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const auto s = unit_stokes(pts[j]);
        int found = -1;
        for (std::size_t g = 0; g < centers.size(); ++g) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) d2 += (s[c] - centers[g][c]) * (s[c] - centers[g][c]);
            if (d2 < tol * tol) {
                found = static_cast<int>(g);
                break;
            }
        }
        if (found < 0) {
            centers.push_back(s);
            found = static_cast<int>(centers.size()) - 1;
        }
        group[j] = found;
    }
    if (static_cast<int>(centers.size()) > max_groups)
        throw std::invalid_argument("optimize_gmi: starting point has more than " +
                                    std::to_string(max_groups) + " states of polarization");
    return group;
}

// snap every SOP group back onto a single Jones vector with phases
// offset + k*2pi/base_phase_count
void project_prs_points(std::vector<Point4>& pts, const std::vector<int>& group,
                        int base_phase_count) {
    project_cm_points(pts);
    const int n_groups = *std::max_element(group.begin(), group.end()) + 1;
    const double phase_step = 2.0 * M_PI / base_phase_count;

    for (int g = 0; g < n_groups; ++g) {
        std::vector<std::size_t> members;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (group[j] == g) members.push_back(j);
        if (members.empty()) continue;

        std::array<double, 3> s{0.0, 0.0, 0.0};
        for (auto j : members) {
            const auto u = unit_stokes(pts[j]);
            for (int c = 0; c < 3; ++c) s[c] += u[c];
        }
        const double n = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
        for (double& v : s) v /= n;

        // inverse of to_stokes for a unit Jones vector
        const double theta = std::acos(std::clamp(s[0], -1.0, 1.0));
        const double phi = std::atan2(-s[2], s[1]);
        const std::complex<double> jx = std::cos(0.5 * theta);
        const std::complex<double> jy = std::sin(0.5 * theta) * std::exp(std::complex<double>(0.0, phi));

        std::vector<double> phase(members.size());
        for (std::size_t t = 0; t < members.size(); ++t) {
            const auto jo = to_jones(pts[members[t]]);
            phase[t] = std::arg(std::conj(jx) * jo.ex + std::conj(jy) * jo.ey);
        }
        std::vector<int> k(members.size());
        std::complex<double> off_acc = 0.0;
        for (std::size_t t = 0; t < members.size(); ++t) {
            const double rel = phase[t] - phase[0];
            int kk = static_cast<int>(std::lround(rel / phase_step)) % base_phase_count;
            if (kk < 0) kk += base_phase_count;
            k[t] = kk;
            off_acc += std::exp(std::complex<double>(0.0, phase[t] - kk * phase_step));
        }
        const double offset = std::arg(off_acc);
        for (std::size_t t = 0; t < members.size(); ++t) {
            const auto rot = std::exp(std::complex<double>(0.0, offset + k[t] * phase_step));
            pts[members[t]] = to_point({jx * rot, jy * rot});
        }
    }
}

JonesSymbol dir_to_jones(const std::array<double, 3>& s) {
    const double theta = std::acos(std::clamp(s[0], -1.0, 1.0));
    const double phi = std::atan2(-s[2], s[1]);
    return {std::complex<double>(std::cos(0.5 * theta), 0.0),
            std::sin(0.5 * theta) * std::exp(std::complex<double>(0.0, phi))};
}

std::array<double, 3> rotate_about(const std::array<double, 3>& v, const std::array<double, 3>& a,
                                   double ang) {
    const double c = std::cos(ang), s = std::sin(ang);
    const std::array<double, 3> cr{a[1] * v[2] - a[2] * v[1], a[2] * v[0] - a[0] * v[2],
                                   a[0] * v[1] - a[1] * v[0]};
    const double d = a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i) out[i] = v[i] * c + cr[i] * s + a[i] * d * (1.0 - c);
    return out;
}

void validate_config(const OptimizerConfig& cfg) {
    if (cfg.step_size <= 0.0) throw std::invalid_argument("optimizer: step_size must be > 0");
    if (cfg.max_iters < 0) throw std::invalid_argument("optimizer: max_iters must be >= 0");
    if (cfg.n_mc_symbols < 1) throw std::invalid_argument("optimizer: n_mc_symbols must be >= 1");
}

}  // namespace

Constellation4D project_constant_modulus(const Constellation4D& c) {
    auto pts = c.points();
    project_cm_points(pts);
    return c.with_points(std::move(pts));
}

std::vector<double> gmi_gradient(const Constellation4D& c, const OptimizerConfig& cfg,
                                 GradientMode mode) {
    validate_config(cfg);
    const auto batch = make_batch(c.size(), cfg);
    if (mode == GradientMode::kFiniteDifference)
        return fd_gradient(c.points(), c.labels(), c.bits_per_symbol(), batch);
    std::vector<double> grad;
    eval_batch(c.points(), c.labels(), c.bits_per_symbol(), batch, &grad);
    return grad;
}

OptimizeResult optimize_gmi(const Constellation4D& c0, const OptimizerConfig& cfg) {
    validate_config(cfg);
    const auto batch = make_batch(c0.size(), cfg);
    const int m = c0.bits_per_symbol();
    const auto& labels = c0.labels();

    std::vector<int> groups;
    if (cfg.constraint == ShapeConstraint::kPrsStructured) {
        groups = sop_groups(c0.points(), 1e-6, 16);
        std::vector<int> count(17, 0);
        for (int g : groups) ++count[g];
        for (int g = 0; g <= *std::max_element(groups.begin(), groups.end()); ++g)
            if (count[g] != 4)
                throw std::invalid_argument(
                    "optimize_gmi: prs-structured constraint needs 16 states of "
                    "polarization with 4 phase states each");
    }

    auto project = [&](std::vector<Point4>& pts) {
        switch (cfg.constraint) {
            case ShapeConstraint::kConstantModulus:
                project_cm_points(pts);
                break;
            case ShapeConstraint::kPrsStructured:
                project_prs_points(pts, groups, 4);
                break;
            case ShapeConstraint::kUnconstrained:
                renormalize_energy(pts);
                break;
        }
    };

    auto pts = c0.points();
    project(pts);
    auto cur = eval_batch(pts, labels, m, batch, nullptr);

    OptimizeResult res{c0.with_points(pts), {}};
    res.trace.push_back({0, cur.gmi, cur.std_error, cfg.step_size});

    double step = cfg.step_size;
    std::vector<double> grad;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        if (cfg.gradient == GradientMode::kFiniteDifference)
            grad = fd_gradient(pts, labels, m, batch);
        else
            eval_batch(pts, labels, m, batch, &grad);
        for (double g : grad)
            if (!std::isfinite(g))
                throw std::runtime_error("optimize_gmi: non-finite gradient at iteration " +
                                         std::to_string(iter));

        bool accepted = false;
        GmiValue cand_val;
        std::vector<Point4> cand;
        for (int halving = 0; halving <= 5; ++halving) {
            cand = pts;
            for (std::size_t j = 0; j < cand.size(); ++j)
                for (int c = 0; c < 4; ++c) cand[j][c] += step * grad[4 * j + c];
            project(cand);
            cand_val = eval_batch(cand, labels, m, batch, nullptr);
            if (cand_val.gmi >= cur.gmi) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.trace.push_back({iter, cur.gmi, cur.std_error, step});
            break;
        }
        pts = std::move(cand);
        cur = cand_val;
        res.trace.push_back({iter, cur.gmi, cur.std_error, step});
    }

    res.constellation = c0.with_points(pts);
    return res;
}

Constellation4D prs_seed_from_2a8psk(double ring_ratio, double split_angle) {
    auto c = make_2a8psk_6b(ring_ratio);
    const auto group = sop_groups(c.points(), 1e-6, 16);  // 8 in practice
    const int n_groups = *std::max_element(group.begin(), group.end()) + 1;

    std::vector<std::array<double, 3>> dirs(n_groups);
    for (std::size_t j = 0; j < c.size(); ++j) dirs[group[j]] = unit_stokes(c.point(j));

    std::vector<Point4> pts(c.size());
    for (int g = 0; g < n_groups; ++g) {
        const auto& d = dirs[g];
        // any axis orthogonal to the group direction works as the split axis
        std::array<double, 3> axis{-d[1], d[0], 0.0};
        double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1]);
        if (an < 1e-6) {
            axis = {1.0, 0.0, 0.0};
            an = 1.0;
        }
        for (double& v : axis) v /= an;

        const auto base = dir_to_jones(d);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (group[j] != g) continue;
            const auto jo = c.jones(j);
            const double ph = std::arg(std::conj(base.ex) * jo.ex + std::conj(base.ey) * jo.ey);
            int k = static_cast<int>(std::lround(ph / (M_PI / 4)));
            k = ((k % 8) + 8) % 8;
            const auto split = rotate_about(d, axis, (k % 2 == 0) ? split_angle : -split_angle);
            const auto jones = dir_to_jones(split);
            const auto rot = std::exp(std::complex<double>(0.0, ph));
            pts[j] = to_point({jones.ex * rot, jones.ey * rot});
        }
    }
    return c.with_points(std::move(pts));
}

Constellation4D labeling_search(const Constellation4D& c, const OptimizerConfig& cfg) {
    validate_config(cfg);
    const std::size_t M = c.size();
    const int m = c.bits_per_symbol();
    const auto batch = make_batch(M, cfg);
    const std::size_t N = batch.idx.size();
    const auto& pts = c.points();
    const double inv_2s2 = 0.5 / batch.sigma2;

    // label swaps leave distances alone, so the exponentials are computed
    // once (row-shifted for range)
    std::vector<double> e(N * M);
    for (std::size_t n = 0; n < N; ++n) {
        Point4 y;
        for (int ch = 0; ch < 4; ++ch) y[ch] = pts[batch.idx[n]][ch] + batch.noise[n][ch];
        double amax = -1e300;
        std::vector<double> a(M);
        for (std::size_t j = 0; j < M; ++j) {
            double d2 = 0.0;
            for (int ch = 0; ch < 4; ++ch) {
                const double d = y[ch] - pts[j][ch];
                d2 += d * d;
            }
            a[j] = -d2 * inv_2s2;
            amax = std::max(amax, a[j]);
        }
        for (std::size_t j = 0; j < M; ++j) e[n * M + j] = std::exp(a[j] - amax);
    }

    auto gmi_of = [&](const std::vector<std::uint32_t>& labels) {
        double sum = 0.0;
        std::vector<double> s0(m), s1(m);
        for (std::size_t n = 0; n < N; ++n) {
            const double* row = &e[n * M];
            std::fill(s0.begin(), s0.end(), 0.0);
            std::fill(s1.begin(), s1.end(), 0.0);
            for (std::size_t j = 0; j < M; ++j)
                for (int i = 0; i < m; ++i)
                    ((labels[j] >> (m - 1 - i)) & 1u ? s1[i] : s0[i]) += row[j];
            double f = m;
            const std::uint32_t lab = labels[batch.idx[n]];
            for (int i = 0; i < m; ++i) {
                const double llr = std::log(s0[i]) - std::log(s1[i]);
                const double sg = ((lab >> (m - 1 - i)) & 1u) ? -1.0 : 1.0;
                f -= softplus_neg(sg * llr) / M_LN2;
            }
            sum += f;
        }
        return sum / N;
    };

    auto labels = c.labels();
    double best = gmi_of(labels);
    int swaps = 0;
    bool improved = true;
    while (improved && swaps < cfg.max_iters) {
        improved = false;
        for (std::size_t a = 0; a < M && swaps < cfg.max_iters; ++a) {
            for (std::size_t b = a + 1; b < M && swaps < cfg.max_iters; ++b) {
                std::swap(labels[a], labels[b]);
                const double g = gmi_of(labels);
                if (g > best) {
                    best = g;
                    ++swaps;
                    improved = true;
                } else {
                    std::swap(labels[a], labels[b]);
                }
            }
        }
    }
    return c.with_labels(std::move(labels));
}

}  // namespace fourdsim
