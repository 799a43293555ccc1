#include "fourdsim/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fourdsim {

namespace {

double sq_dist(const Point4& a, const Point4& b) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

double energy(const Point4& p) {
    return p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3];
}

int gray_decode(int g) {
    int b = 0;
    for (; g; g >>= 1) b ^= g;
    return b;
}

// One 2D 8QAM generator: returns 8 complex points indexed by 3-bit label.
std::array<std::complex<double>, 8> make_8qam_2d(Pm8qamVariant variant) {
    std::array<std::complex<double>, 8> pts;
    if (variant == Pm8qamVariant::kStar2Ring) {
        // inner QPSK rotated 45 deg, outer QPSK on the axes, ring ratio sqrt(3)
        const double r_in = 1.0;
        const double r_out = std::sqrt(3.0);
        for (int k = 0; k < 4; ++k) {
            const int phase_bits = k;            // Gray over quadrants
            const int q = gray_decode(phase_bits);
            const double a_in = M_PI / 4.0 + q * M_PI / 2.0;
            const double a_out = q * M_PI / 2.0;
            pts[phase_bits] = std::polar(r_in, a_in);
            pts[4 | phase_bits] = std::polar(r_out, a_out);
        }
    } else {
        // min-distance-optimal 8QAM: unit square corners plus four axis
        // points at radius 1 + sqrt(3); all nearest-neighbor distances 2
        const double r = 1.0 + std::sqrt(3.0);
        pts[0] = {1.0, 1.0};
        pts[1] = {-1.0, 1.0};
        pts[3] = {-1.0, -1.0};
        pts[2] = {1.0, -1.0};
        pts[4] = {r, 0.0};
        pts[5] = {0.0, r};
        pts[7] = {-r, 0.0};
        pts[6] = {0.0, -r};
    }
    return pts;
}

}  // namespace

StokesVector to_stokes(const JonesSymbol& j) {
    const double px = std::norm(j.ex);
    const double py = std::norm(j.ey);
    const std::complex<double> c = std::conj(j.ex) * j.ey;
    return {px + py, px - py, 2.0 * c.real(), -2.0 * c.imag()};
}

Constellation4D::Constellation4D(std::vector<Point4> points, std::vector<std::uint32_t> labels,
                                 std::string name, int bits_per_symbol)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      name_(std::move(name)),
      bits_per_symbol_(bits_per_symbol) {
    const std::size_t n = std::size_t{1} << bits_per_symbol_;
    if (points_.size() != n)
        throw std::invalid_argument("constellation: wrong row count (expected " +
                                    std::to_string(n) + " points, got " +
                                    std::to_string(points_.size()) + ")");
    if (labels_.size() != n) throw std::invalid_argument("constellation: label count mismatch");

    label_to_index_.assign(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels_[i] >= n) throw std::invalid_argument("constellation: label out of range");
        if (label_to_index_[labels_[i]] != n)
            throw std::invalid_argument("constellation: label collision on " +
                                        std::to_string(labels_[i]));
        label_to_index_[labels_[i]] = i;
        for (int d = 0; d < 4; ++d)
            if (!std::isfinite(points_[i][d]))
                throw std::invalid_argument("constellation: non-finite coordinate");
    }

    double mean_e = 0.0;
    for (const auto& p : points_) mean_e += energy(p);
    mean_e /= static_cast<double>(n);
    if (mean_e <= 0.0) throw std::invalid_argument("constellation: zero mean energy");
    const double scale = 1.0 / std::sqrt(mean_e);
    for (auto& p : points_)
        for (auto& v : p) v *= scale;

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (sq_dist(points_[i], points_[j]) <= 1e-18)
                throw std::invalid_argument("constellation: coincident points " +
                                            std::to_string(i) + "," + std::to_string(j));
}

Constellation4D Constellation4D::with_points(std::vector<Point4> points) const {
    return Constellation4D(std::move(points), labels_, name_, bits_per_symbol_);
}

Constellation4D Constellation4D::with_labels(std::vector<std::uint32_t> labels) const {
    return Constellation4D(points_, std::move(labels), name_, bits_per_symbol_);
}

Constellation4D make_pm8qam(Pm8qamVariant variant) {
    const auto q2d = make_8qam_2d(variant);
    std::vector<Point4> pts(64);
    std::vector<std::uint32_t> labels(64);
    for (int lx = 0; lx < 8; ++lx) {
        for (int ly = 0; ly < 8; ++ly) {
            const int lab = (lx << 3) | ly;
            pts[lab] = to_point({q2d[lx], q2d[ly]});
            labels[lab] = static_cast<std::uint32_t>(lab);
        }
    }
    const char* name =
        variant == Pm8qamVariant::kStar2Ring ? "pm8qam-star" : "pm8qam-hex";
    return Constellation4D(std::move(pts), std::move(labels), name);
}

Constellation4D make_2a8psk_6b(double ring_ratio) {
    if (!(ring_ratio > 0.0) || !(ring_ratio < 1.0))
        throw std::invalid_argument("make_2a8psk_6b: ring_ratio must be in (0,1)");
    const double r_out = 1.0 / std::sqrt(1.0 + ring_ratio * ring_ratio);
    const double r_in = ring_ratio * r_out;  // r_in^2 + r_out^2 = 1 per symbol

    std::vector<Point4> pts(64);
    std::vector<std::uint32_t> labels(64);
    for (int lab = 0; lab < 64; ++lab) {
        const int gx = (lab >> 3) & 7;
        const int gy = lab & 7;
        const int px = gray_decode(gx);
        const int py = gray_decode(gy);
        const int parity = __builtin_popcount(static_cast<unsigned>(lab)) & 1;
        const double rx = parity ? r_out : r_in;
        const double ry = parity ? r_in : r_out;
        const JonesSymbol j{std::polar(rx, px * M_PI / 4.0), std::polar(ry, py * M_PI / 4.0)};
        pts[lab] = to_point(j);
        labels[lab] = static_cast<std::uint32_t>(lab);
    }
    return Constellation4D(std::move(pts), std::move(labels), "2a8psk-6b");
}

Constellation4D make_prs64(const PrsParams& params) {
    if (params.base_phase_count != 4)
        throw std::invalid_argument("make_prs64: base_phase_count must be 4");
    std::vector<Point4> pts;
    std::vector<std::uint32_t> labels;
    pts.reserve(64);
    labels.reserve(64);
    for (int s = 0; s < 16; ++s) {
        const auto& d = params.sop_directions[s];
        const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (std::abs(norm - 1.0) > 1e-9)
            throw std::invalid_argument("make_prs64: sop direction not unit-norm");
        const double theta = std::acos(std::clamp(d[0], -1.0, 1.0));
        const double psi = std::atan2(d[2], d[1]);
        const std::complex<double> ex0 = std::cos(theta / 2.0);
        const std::complex<double> ey0 = std::polar(std::sin(theta / 2.0), psi);
        for (int k = 0; k < params.base_phase_count; ++k) {
            const double phi = params.phase_offsets[s] + k * 2.0 * M_PI / params.base_phase_count;
            const std::complex<double> rot = std::polar(1.0, phi);
            pts.push_back(to_point({ex0 * rot, ey0 * rot}));
            labels.push_back(static_cast<std::uint32_t>(s * params.base_phase_count + k));
        }
    }
    return Constellation4D(std::move(pts), std::move(labels), "prs64");
}

Constellation4D load_constellation(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_constellation: cannot open " + path);

    std::vector<Point4> pts;
    std::vector<std::uint32_t> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (pts.empty() && line.rfind("x1", 0) == 0) continue;  // header
        std::stringstream ss(line);
        Point4 p;
        long lab = -1;
        char comma;
        for (int d = 0; d < 4; ++d) {
            if (!(ss >> p[d] >> comma) || comma != ',')
                throw std::runtime_error("load_constellation: parse failure at line " +
                                         std::to_string(lineno));
        }
        if (!(ss >> lab) || lab < 0)
            throw std::runtime_error("load_constellation: parse failure at line " +
                                     std::to_string(lineno));
        pts.push_back(p);
        labels.push_back(static_cast<std::uint32_t>(lab));
    }
    std::size_t n = pts.size();
    int m = 0;
    while ((std::size_t{1} << m) < n) ++m;
    if (n == 0 || (std::size_t{1} << m) != n)
        throw std::runtime_error("load_constellation: wrong row count (" + std::to_string(n) + ")");
    return Constellation4D(std::move(pts), std::move(labels), path, m);
}

void save_constellation(const Constellation4D& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_constellation: cannot open " + path);
    f << "x1,x2,x3,x4,label\n";
    f.precision(17);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& p = c.point(i);
        f << p[0] << ',' << p[1] << ',' << p[2] << ',' << p[3] << ',' << c.label(i) << '\n';
    }
    if (!f) throw std::runtime_error("save_constellation: write failure on " + path);
}

int distinct_sops(const Constellation4D& c, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("distinct_sops: tol must be > 0");
    std::vector<std::array<double, 3>> reps;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const StokesVector s = to_stokes(c.jones(i));
        const std::array<double, 3> v{s.s1 / s.s0, s.s2 / s.s0, s.s3 / s.s0};
        bool found = false;
        for (const auto& r : reps) {
            const double dx = v[0] - r[0], dy = v[1] - r[1], dz = v[2] - r[2];
            if (std::sqrt(dx * dx + dy * dy + dz * dz) <= tol) {
                found = true;
                break;
            }
        }
        if (!found) reps.push_back(v);
    }
    return static_cast<int>(reps.size());
}

double energy_variance(const Constellation4D& c) {
    double mean = 0.0;
    for (const auto& p : c.points()) mean += energy(p);
    mean /= static_cast<double>(c.size());
    double var = 0.0;
    for (const auto& p : c.points()) {
        const double d = energy(p) - mean;
        var += d * d;
    }
    return var / static_cast<double>(c.size());
}

double min_distance(const Constellation4D& c) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j)
            best = std::min(best, sq_dist(c.point(i), c.point(j)));
    return std::sqrt(best);
}

std::vector<std::uint32_t> map_bits(const Constellation4D& c, std::span<const std::uint8_t> bits) {
    const int m = c.bits_per_symbol();
    if (bits.size() % m != 0)
        throw std::invalid_argument("map_bits: bit count not divisible by bits_per_symbol");
    std::vector<std::uint32_t> idx(bits.size() / m);
    for (std::size_t s = 0; s < idx.size(); ++s) {
        std::uint32_t lab = 0;
        for (int b = 0; b < m; ++b) lab = (lab << 1) | bits[s * m + b];
        idx[s] = static_cast<std::uint32_t>(c.index_of_label(lab));
    }
    return idx;
}

std::uint32_t demap_hard(const Constellation4D& c, const Point4& y) {
    double best_d = std::numeric_limits<double>::infinity();
    std::uint32_t best_lab = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = sq_dist(y, c.point(i));
        const std::uint32_t lab = c.label(i);
        if (d < best_d || (d == best_d && lab < best_lab)) {
            best_d = d;
            best_lab = lab;
        }
    }
    return best_lab;
}

std::vector<std::uint8_t> demap_hard_bits(const Constellation4D& c, std::span<const Point4> ys) {
    const int m = c.bits_per_symbol();
    std::vector<std::uint8_t> bits(ys.size() * m);
    for (std::size_t s = 0; s < ys.size(); ++s) {
        const std::uint32_t lab = demap_hard(c, ys[s]);
        for (int b = 0; b < m; ++b) bits[s * m + b] = (lab >> (m - 1 - b)) & 1u;
    }
    return bits;
}

std::vector<std::uint8_t> labels_to_bits(const Constellation4D& c,
                                         std::span<const std::uint32_t> indices) {
    const int m = c.bits_per_symbol();
    std::vector<std::uint8_t> bits(indices.size() * m);
    for (std::size_t s = 0; s < indices.size(); ++s) {
        const std::uint32_t lab = c.label(indices[s]);
        for (int b = 0; b < m; ++b) bits[s * m + b] = (lab >> (m - 1 - b)) & 1u;
    }
    return bits;
}

}  // namespace fourdsim
