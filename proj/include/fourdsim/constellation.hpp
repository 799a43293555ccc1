#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fourdsim {

// One dual-polarization symbol as [Re Ex, Im Ex, Re Ey, Im Ey].
using Point4 = std::array<double, 4>;

struct JonesSymbol {
    std::complex<double> ex;
    std::complex<double> ey;
};

struct StokesVector {
    double s0;
    double s1;
    double s2;
    double s3;
};

inline Point4 to_point(const JonesSymbol& j) {
    return {j.ex.real(), j.ex.imag(), j.ey.real(), j.ey.imag()};
}

inline JonesSymbol to_jones(const Point4& p) {
    return {{p[0], p[1]}, {p[2], p[3]}};
}

// s0 = |Ex|^2 + |Ey|^2, s1 = |Ex|^2 - |Ey|^2,
// s2 = 2 Re(conj(Ex) Ey), s3 = -2 Im(conj(Ex) Ey)
StokesVector to_stokes(const JonesSymbol& j);

// Set of 2^m points in 4 real dimensions with an m-bit label per point.
// Construction normalizes to unit mean symbol energy and validates that
// labels form a bijection and no two points coincide.
class Constellation4D {
public:
    Constellation4D(std::vector<Point4> points, std::vector<std::uint32_t> labels,
                    std::string name, int bits_per_symbol = 6);

    int bits_per_symbol() const { return bits_per_symbol_; }
    std::size_t size() const { return points_.size(); }
    const std::string& name() const { return name_; }

    const Point4& point(std::size_t i) const { return points_[i]; }
    std::uint32_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<Point4>& points() const { return points_; }
    const std::vector<std::uint32_t>& labels() const { return labels_; }

    std::size_t index_of_label(std::uint32_t lab) const { return label_to_index_[lab]; }
    JonesSymbol jones(std::size_t i) const { return to_jones(points_[i]); }

    // i-th label bit of point index, most-significant-first
    int label_bit(std::size_t index, int bit) const {
        return (labels_[index] >> (bits_per_symbol_ - 1 - bit)) & 1u;
    }

    Constellation4D with_points(std::vector<Point4> points) const;
    Constellation4D with_labels(std::vector<std::uint32_t> labels) const;

private:
    std::vector<Point4> points_;
    std::vector<std::uint32_t> labels_;
    std::vector<std::size_t> label_to_index_;
    std::string name_;
    int bits_per_symbol_;
};

enum class Pm8qamVariant { kStar2Ring, kOptimumHex };

Constellation4D make_pm8qam(Pm8qamVariant variant = Pm8qamVariant::kStar2Ring);

// X and Y carry 8PSK on complementary ring radii so that the 4D energy is
// identical for all 64 points; ring selection is the parity of the 6 label
// bits, ring_ratio = r_inner / r_outer.
Constellation4D make_2a8psk_6b(double ring_ratio);

struct PrsParams {
    std::array<std::array<double, 3>, 16> sop_directions;  // unit Stokes 3-vectors
    std::array<double, 16> phase_offsets;                   // radians
    int base_phase_count = 4;
};

// 16 SOPs x base_phase_count absolute-phase states, constant modulus.
Constellation4D make_prs64(const PrsParams& params);

// CSV with header "x1,x2,x3,x4,label", one row per point.
Constellation4D load_constellation(const std::string& path);
void save_constellation(const Constellation4D& c, const std::string& path);

// Number of distinct normalized (s1,s2,s3)/s0 directions under Euclidean
// distance tolerance tol.
int distinct_sops(const Constellation4D& c, double tol);

// Population variance of per-point 4D energy.
double energy_variance(const Constellation4D& c);
double min_distance(const Constellation4D& c);

// bits (0/1 values, length divisible by m) -> point indices
std::vector<std::uint32_t> map_bits(const Constellation4D& c, std::span<const std::uint8_t> bits);

// Nearest point by Euclidean distance, ties broken by lowest label value.
std::uint32_t demap_hard(const Constellation4D& c, const Point4& y);
std::vector<std::uint8_t> demap_hard_bits(const Constellation4D& c, std::span<const Point4> ys);

std::vector<std::uint8_t> labels_to_bits(const Constellation4D& c,
                                         std::span<const std::uint32_t> indices);

}  // namespace fourdsim
