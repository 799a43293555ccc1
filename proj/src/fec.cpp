#include "fourdsim/fec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fourdsim/channel.hpp"
#include "fourdsim/rng.hpp"

namespace fourdsim {

LdpcCode::LdpcCode(int n, int k, std::vector<std::vector<int>> info_checks)
    : n_(n), k_(k), info_checks_(std::move(info_checks)) {
    if (n <= 0 || k <= 0 || k >= n) throw std::invalid_argument("LdpcCode: bad n/k");
    if (static_cast<int>(info_checks_.size()) != k)
        throw std::invalid_argument("LdpcCode: expected one check list per information column");
    const int m = n - k;
    std::vector<int> check_deg(m, 0);
    for (const auto& col : info_checks_) {
        if (col.empty()) throw std::invalid_argument("LdpcCode: empty information column");
        std::set<int> seen;
        for (int c : col) {
            if (c < 0 || c >= m) throw std::invalid_argument("LdpcCode: check index out of range");
            if (!seen.insert(c).second)
                throw std::invalid_argument("LdpcCode: repeated check in one column");
            ++check_deg[c];
        }
    }
    // accumulator: parity p joins checks p and p+1
    for (int p = 0; p < m; ++p) {
        ++check_deg[p];
        if (p + 1 < m) ++check_deg[p + 1];
    }

    check_ptr_.assign(m + 1, 0);
    for (int c = 0; c < m; ++c) check_ptr_[c + 1] = check_ptr_[c] + check_deg[c];
    edge_var_.assign(check_ptr_[m], -1);
    std::vector<int> fill(check_ptr_.begin(), check_ptr_.end() - 1);
    for (int j = 0; j < k; ++j)
        for (int c : info_checks_[j]) edge_var_[fill[c]++] = j;
    for (int p = 0; p < m; ++p) {
        edge_var_[fill[p]++] = k + p;
        if (p + 1 < m) edge_var_[fill[p + 1]++] = k + p;
    }
}

LdpcCode load_code(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_code: cannot open " + path);
    int n = 0, k = 0;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_code: empty file " + path);
    {
        std::stringstream ss(line);
        if (!(ss >> n >> k)) throw std::runtime_error("load_code: malformed header in " + path);
    }
    std::vector<std::vector<int>> cols;
    cols.reserve(k);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<int> col;
        int v;
        while (ss >> v) col.push_back(v);
        if (col.empty()) throw std::runtime_error("load_code: malformed column line in " + path);
        cols.push_back(std::move(col));
    }
    if (static_cast<int>(cols.size()) != k)
        throw std::runtime_error("load_code: truncated file, expected " + std::to_string(k) +
                                 " columns, got " + std::to_string(cols.size()));
    return LdpcCode(n, k, std::move(cols));
}

void save_code(const LdpcCode& code, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_code: cannot open " + path);
    f << code.n() << ' ' << code.k() << '\n';
    for (const auto& col : code.info_checks()) {
        for (std::size_t i = 0; i < col.size(); ++i) f << col[i] << (i + 1 < col.size() ? ' ' : '\n');
    }
    if (!f) throw std::runtime_error("save_code: write failure on " + path);
}

LdpcCode make_qc_ira_code(int n, int k, int group_size,
                          std::span<const IraDegreeGroup> profile, std::uint64_t seed) {
    const int m = n - k;
    if (m % group_size != 0 || k % group_size != 0)
        throw std::invalid_argument("make_qc_ira_code: group_size must divide k and n-k");
    const int q = m / group_size;
    int total_groups = 0;
    for (const auto& g : profile) total_groups += g.groups;
    if (total_groups * group_size != k)
        throw std::invalid_argument("make_qc_ira_code: profile does not cover k columns");

    const rng::Stream st{seed, 0x4c445043ULL};
    std::set<int> used_diffs;  // pairwise base differences mod m, both signs
    std::uint64_t ctr = 0;
    std::vector<std::vector<int>> cols(k);
    int group_index = 0;
    for (const auto& pg : profile) {
        for (int g = 0; g < pg.groups; ++g, ++group_index) {
            std::vector<int> base;
            for (int attempt = 0; attempt < 2000 && static_cast<int>(base.size()) < pg.degree;
                 ++attempt) {
                const int cand = static_cast<int>(st.integer(ctr++, m));
                bool ok = std::find(base.begin(), base.end(), cand) == base.end();
                for (int b : base) {
                    if (!ok) break;
                    const int d1 = ((cand - b) % m + m) % m;
                    const int d2 = (m - d1) % m;
                    if (used_diffs.count(d1) || used_diffs.count(d2)) ok = false;
                }
                if (ok) base.push_back(cand);
            }
            // capacity exhausted: fall back to distinct entries only
            while (static_cast<int>(base.size()) < pg.degree) {
                const int cand = static_cast<int>(st.integer(ctr++, m));
                if (std::find(base.begin(), base.end(), cand) == base.end()) base.push_back(cand);
            }
            for (std::size_t a = 0; a < base.size(); ++a)
                for (std::size_t b = a + 1; b < base.size(); ++b) {
                    const int d1 = ((base[a] - base[b]) % m + m) % m;
                    used_diffs.insert(d1);
                    used_diffs.insert((m - d1) % m);
                }
            for (int i = 0; i < group_size; ++i) {
                auto& col = cols[static_cast<std::size_t>(group_index) * group_size + i];
                for (int b : base) col.push_back((b + i * q) % m);
                std::sort(col.begin(), col.end());
            }
        }
    }
    return LdpcCode(n, k, std::move(cols));
}

std::vector<std::uint8_t> encode(const LdpcCode& code, std::span<const std::uint8_t> info_bits) {
    if (static_cast<int>(info_bits.size()) != code.k())
        throw std::invalid_argument("encode: info length mismatch");
    const int m = code.num_checks();
    std::vector<std::uint8_t> cw(code.n(), 0);
    std::copy(info_bits.begin(), info_bits.end(), cw.begin());
    std::vector<std::uint8_t> acc(m, 0);
    const auto& cols = code.info_checks();
    for (int j = 0; j < code.k(); ++j)
        if (info_bits[j])
            for (int c : cols[j]) acc[c] ^= 1;
    std::uint8_t run = 0;
    for (int p = 0; p < m; ++p) {
        run ^= acc[p];
        cw[code.k() + p] = run;
    }
    return cw;
}

bool check_codeword(const LdpcCode& code, std::span<const std::uint8_t> codeword) {
    if (static_cast<int>(codeword.size()) != code.n()) return false;
    const auto& ptr = code.check_ptr();
    const auto& ev = code.edge_var();
    for (int c = 0; c < code.num_checks(); ++c) {
        std::uint8_t s = 0;
        for (int e = ptr[c]; e < ptr[c + 1]; ++e) s ^= codeword[ev[e]] & 1u;
        if (s) return false;
    }
    return true;
}

DecodeResult decode(const LdpcCode& code, std::span<const double> llrs, int max_iters,
                    DecodeAlgorithm algorithm, double min_sum_alpha) {
    if (static_cast<int>(llrs.size()) != code.n())
        throw std::invalid_argument("decode: LLR length mismatch");
    const int n = code.n();
    const int m = code.num_checks();
    const auto& ptr = code.check_ptr();
    const auto& ev = code.edge_var();
    const int n_edges = ptr[m];

    std::vector<double> vc(n_edges);  // variable-to-check
    std::vector<double> cv(n_edges, 0.0);
    for (int e = 0; e < n_edges; ++e) vc[e] = llrs[ev[e]];

    std::vector<double> total(n);
    std::vector<std::uint8_t> hard(n);
    DecodeResult res;
    for (int iter = 1; iter <= max_iters; ++iter) {
        // check update
        for (int c = 0; c < m; ++c) {
            const int b = ptr[c], e_end = ptr[c + 1];
            if (algorithm == DecodeAlgorithm::kNormalizedMinSum) {
                double min1 = INFINITY, min2 = INFINITY;
                int min_e = -1;
                int sign = 0;
                for (int e = b; e < e_end; ++e) {
                    const double v = vc[e];
                    const double a = std::abs(v);
                    if (v < 0) sign ^= 1;
                    if (a < min1) {
                        min2 = min1;
                        min1 = a;
                        min_e = e;
                    } else if (a < min2) {
                        min2 = a;
                    }
                }
                for (int e = b; e < e_end; ++e) {
                    const double a = (e == min_e) ? min2 : min1;
                    int s = sign ^ (vc[e] < 0 ? 1 : 0);
                    cv[e] = (s ? -1.0 : 1.0) * min_sum_alpha * a;
                }
            } else {
                // sum-product via tanh, with clamping for stability
                double prod = 1.0;
                int zero_count = 0;
                int zero_e = -1;
                for (int e = b; e < e_end; ++e) {
                    const double t = std::tanh(0.5 * std::clamp(vc[e], -40.0, 40.0));
                    if (std::abs(t) < 1e-300) {
                        ++zero_count;
                        zero_e = e;
                    } else {
                        prod *= t;
                    }
                }
                for (int e = b; e < e_end; ++e) {
                    double t;
                    if (zero_count > 1) {
                        t = 0.0;
                    } else if (zero_count == 1) {
                        t = (e == zero_e) ? prod : 0.0;
                    } else {
                        const double te = std::tanh(0.5 * std::clamp(vc[e], -40.0, 40.0));
                        t = prod / te;
                    }
                    t = std::clamp(t, -0.999999999999, 0.999999999999);
                    cv[e] = 2.0 * std::atanh(t);
                }
            }
        }
        // variable update
        std::fill(total.begin(), total.end(), 0.0);
        for (int e = 0; e < n_edges; ++e) total[ev[e]] += cv[e];
        for (int v = 0; v < n; ++v) total[v] += llrs[v];
        for (int e = 0; e < n_edges; ++e) vc[e] = total[ev[e]] - cv[e];

        bool decidable = true;
        for (int v = 0; v < n; ++v) {
            hard[v] = total[v] < 0.0 ? 1 : 0;
            if (total[v] == 0.0) decidable = false;  // no information on this bit
        }
        res.iterations_used = iter;
        if (decidable && check_codeword(code, hard)) {
            res.converged = true;
            break;
        }
    }
    res.bits.assign(hard.begin(), hard.begin() + code.k());
    return res;
}

std::vector<std::uint8_t> interleave_bits(std::span<const std::uint8_t> codeword, int m) {
    if (codeword.size() % m != 0)
        throw std::invalid_argument("interleave_bits: length not divisible by depth");
    const std::size_t cols = codeword.size() / m;
    std::vector<std::uint8_t> out(codeword.size());
    for (std::size_t j = 0; j < cols; ++j)
        for (int r = 0; r < m; ++r) out[j * m + r] = codeword[r * cols + j];
    return out;
}

std::vector<double> deinterleave_llrs(std::span<const double> llrs, int m) {
    if (llrs.size() % m != 0)
        throw std::invalid_argument("deinterleave_llrs: length not divisible by depth");
    const std::size_t cols = llrs.size() / m;
    std::vector<double> out(llrs.size());
    for (std::size_t j = 0; j < cols; ++j)
        for (int r = 0; r < m; ++r) out[r * cols + j] = llrs[j * m + r];
    return out;
}

PostFecResult post_fec_chain(const Constellation4D& c, const LdpcCode& code, double snr_db,
                             int n_frames, std::uint64_t seed, const PostFecConfig& cfg) {
    const int m = c.bits_per_symbol();
    if (code.n() % m != 0)
        throw std::invalid_argument("post_fec_chain: code length not divisible by bits/symbol");
    const std::size_t n_sym = static_cast<std::size_t>(code.n()) / m;
    const double sigma2 = noise_sigma2_per_dim(snr_db);

    std::uint64_t pre_err = 0, post_err = 0;
    double gmi_sum = 0.0;
    std::uint64_t gmi_n = 0;
    for (int f = 0; f < n_frames; ++f) {
        const rng::Stream bits_st{seed, 0x42495453ULL + static_cast<std::uint64_t>(f)};
        std::vector<std::uint8_t> info(code.k());
        for (int i = 0; i < code.k(); ++i) info[i] = bits_st.bits(i) & 1u;
        const auto cw = encode(code, info);
        const auto tx_bits = interleave_bits(cw, m);
        const auto indices = map_bits(c, tx_bits);
        std::vector<Point4> symbols(n_sym);
        for (std::size_t s = 0; s < n_sym; ++s) symbols[s] = c.point(indices[s]);
        const auto noisy =
            awgn_symbols(symbols, {snr_db}, seed ^ (0x4e46524dULL + static_cast<std::uint64_t>(f)));
        const auto frame = llr_exact(c, noisy, sigma2);

        auto g = gmi_from_llrs(tx_bits, frame);
        gmi_sum += g.value * static_cast<double>(n_sym);
        gmi_n += n_sym;

        for (std::size_t i = 0; i < frame.llrs.size(); ++i) {
            const int hard = frame.llrs[i] < 0.0 ? 1 : 0;
            if (hard != tx_bits[i]) ++pre_err;
        }
        const auto cw_llrs = deinterleave_llrs(frame.llrs, m);
        const auto dec = decode(code, cw_llrs, cfg.max_iters, cfg.algorithm, cfg.min_sum_alpha);
        for (int i = 0; i < code.k(); ++i)
            if (dec.bits[i] != info[i]) ++post_err;
    }
    PostFecResult r;
    r.frames = n_frames;
    r.pre_fec_ber = static_cast<double>(pre_err) /
                    (static_cast<double>(n_frames) * static_cast<double>(code.n()));
    r.post_fec_ber = static_cast<double>(post_err) /
                     (static_cast<double>(n_frames) * static_cast<double>(code.k()));
    r.ngmi_value = gmi_sum / static_cast<double>(gmi_n) / static_cast<double>(m);
    return r;
}

}  // namespace fourdsim
