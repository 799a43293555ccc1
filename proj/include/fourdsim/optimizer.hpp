#pragma once

#include <cstdint>
#include <vector>

#include "fourdsim/constellation.hpp"

namespace fourdsim {

enum class ShapeConstraint { kConstantModulus, kPrsStructured, kUnconstrained };
enum class GradientMode { kFiniteDifference, kAnalytic };

struct OptimizerConfig {
    double target_snr_db = 9.0;
    int max_iters = 20;         // coordinate-ascent iterations; labeling_search
                                // reads it as the accepted-swap budget
    double step_size = 0.05;
    int n_mc_symbols = 20000;
    std::uint64_t seed = 1;
    ShapeConstraint constraint = ShapeConstraint::kConstantModulus;
    GradientMode gradient = GradientMode::kFiniteDifference;
};

struct TraceRow {
    int iter;
    double gmi;
    double gmi_stderr;
    double step;
};

struct OptimizeResult {
    Constellation4D constellation;
    std::vector<TraceRow> trace;  // row 0 is the starting point
};

// Projected-gradient ascent on the Monte-Carlo GMI estimate at
// cfg.target_snr_db with common random numbers across iterations. The
// constraint projection runs after every step; on a GMI decrease the step
// is halved up to 5 times, and the iteration loop stops once no step
// length makes progress.
OptimizeResult optimize_gmi(const Constellation4D& c0, const OptimizerConfig& cfg);

// Rescale every point to unit norm (the whole-set renormalization is then
// a no-op). Throws on a zero-norm point.
Constellation4D project_constant_modulus(const Constellation4D& c);

// Pairwise label-swap hill climbing on the common-random-number GMI
// estimate; first-improvement order, at most cfg.max_iters accepted swaps.
Constellation4D labeling_search(const Constellation4D& c, const OptimizerConfig& cfg);

// 16-SOP starting point for prs-structured optimization: each of the 8
// states of polarization of 6b4D-2A8PSK (8 phases each, pi/4 spacing) is
// split into two SOPs rotated +/- split_angle on the Poincare sphere, one
// carrying the even pi/2-spaced phases and one the odd. Labels carry over.
Constellation4D prs_seed_from_2a8psk(double ring_ratio, double split_angle);

// Gradient of the batch GMI estimate with respect to the 4*M flattened
// coordinates, on the batch defined by cfg. The transmitted samples are
// reparameterized as x + fixed noise, so the finite-difference and
// analytic paths see the same objective.
std::vector<double> gmi_gradient(const Constellation4D& c, const OptimizerConfig& cfg,
                                 GradientMode mode);

}  // namespace fourdsim
