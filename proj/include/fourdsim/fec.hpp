#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fourdsim/constellation.hpp"
#include "fourdsim/metrics.hpp"

namespace fourdsim {

// Systematic IRA LDPC: variable j < k is an information column with the
// check connections listed in info_checks[j]; the n-k parity columns form
// the implicit accumulator chain (parity p participates in checks p and
// p+1).
class LdpcCode {
public:
    LdpcCode(int n, int k, std::vector<std::vector<int>> info_checks);

    int n() const { return n_; }
    int k() const { return k_; }
    int num_checks() const { return n_ - k_; }
    double rate() const { return static_cast<double>(k_) / n_; }
    const std::vector<std::vector<int>>& info_checks() const { return info_checks_; }

    // flattened check-major edge structure (info + parity edges)
    const std::vector<int>& check_ptr() const { return check_ptr_; }
    const std::vector<int>& edge_var() const { return edge_var_; }

private:
    int n_;
    int k_;
    std::vector<std::vector<int>> info_checks_;
    std::vector<int> check_ptr_;
    std::vector<int> edge_var_;
};

// Text format: line 1 "n k", then one line per information column with its
// space-separated check indices.
LdpcCode load_code(const std::string& path);
void save_code(const LdpcCode& code, const std::string& path);

struct IraDegreeGroup {
    int groups;   // number of 360-column-like groups
    int degree;   // checks per column in this group
};

// Quasi-cyclic IRA construction: columns within a group hit checks
// (base + i*q) mod (n-k); base entries chosen to avoid repeated pairwise
// differences (4-cycles) where capacity allows.
LdpcCode make_qc_ira_code(int n, int k, int group_size,
                          std::span<const IraDegreeGroup> profile, std::uint64_t seed);

std::vector<std::uint8_t> encode(const LdpcCode& code, std::span<const std::uint8_t> info_bits);

bool check_codeword(const LdpcCode& code, std::span<const std::uint8_t> codeword);

enum class DecodeAlgorithm { kSumProduct, kNormalizedMinSum };

struct DecodeResult {
    std::vector<std::uint8_t> bits;  // k information bits
    int iterations_used = 0;
    bool converged = false;
};

// LLR sign convention matches the metrics module: positive favors bit 0.
DecodeResult decode(const LdpcCode& code, std::span<const double> llrs, int max_iters,
                    DecodeAlgorithm algorithm = DecodeAlgorithm::kNormalizedMinSum,
                    double min_sum_alpha = 0.75);

// Fixed row-column interleaver of depth m between codeword bits and symbol
// bit positions: bit position r of symbol j carries codeword bit r*(n/m)+j.
std::vector<std::uint8_t> interleave_bits(std::span<const std::uint8_t> codeword, int m);
std::vector<double> deinterleave_llrs(std::span<const double> llrs, int m);

struct PostFecConfig {
    int max_iters = 50;
    DecodeAlgorithm algorithm = DecodeAlgorithm::kNormalizedMinSum;
    double min_sum_alpha = 0.75;
};

struct PostFecResult {
    double pre_fec_ber = 0.0;
    double ngmi_value = 0.0;
    double post_fec_ber = 0.0;
    int frames = 0;
};

// bits -> encode -> interleave -> symbols -> AWGN -> exact LLRs ->
// deinterleave -> decode, all three metrics on identical noise.
PostFecResult post_fec_chain(const Constellation4D& c, const LdpcCode& code, double snr_db,
                             int n_frames, std::uint64_t seed,
                             const PostFecConfig& cfg = {});

}  // namespace fourdsim
