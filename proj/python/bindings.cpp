#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fourdsim/channel.hpp"
#include "fourdsim/constellation.hpp"
#include "fourdsim/fec.hpp"
#include "fourdsim/metrics.hpp"
#include "fourdsim/optimizer.hpp"
#include "fourdsim/rxdsp.hpp"

namespace py = pybind11;
using namespace fourdsim;

namespace {

std::vector<Point4> points_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    const auto buf = a.unchecked<2>();
    if (buf.shape(1) != 4) throw std::invalid_argument("expected an (N, 4) array");
    std::vector<Point4> pts(buf.shape(0));
    for (py::ssize_t i = 0; i < buf.shape(0); ++i)
        for (int k = 0; k < 4; ++k) pts[i][k] = buf(i, k);
    return pts;
}

py::array_t<double> points_to_array(std::span<const Point4> pts) {
    py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{4}});
    auto buf = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int k = 0; k < 4; ++k) buf(i, k) = pts[i][k];
    return a;
}

py::array_t<std::complex<double>> cvec_to_array(const std::vector<std::complex<double>>& v) {
    py::array_t<std::complex<double>> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

std::vector<std::complex<double>> cvec_from_array(const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& a) {
    const auto buf = a.unchecked<1>();
    std::vector<std::complex<double>> v(buf.shape(0));
    for (py::ssize_t i = 0; i < buf.shape(0); ++i) v[i] = buf(i);
    return v;
}

py::dict curve_to_dict(const std::vector<GmiCurvePoint>& curve, int m) {
    std::vector<double> snr, gmi, se, ng, ber;
    for (const auto& p : curve) {
        snr.push_back(p.snr.snr_db);
        gmi.push_back(p.gmi.value);
        se.push_back(p.gmi.std_error);
        ng.push_back(ngmi(p.gmi, m));
        ber.push_back(p.ber);
    }
    const auto arr = [](const std::vector<double>& v) {
        return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
    };
    py::dict d;
    d["snr_db"] = arr(snr);
    d["gmi"] = arr(gmi);
    d["gmi_stderr"] = arr(se);
    d["ngmi"] = arr(ng);
    d["ber"] = arr(ber);
    return d;
}

}  // namespace

PYBIND11_MODULE(_fourdsim, m) {
    m.doc() = "4D coherent transmission toolkit core";
    py::class_<Constellation4D>(m, "Constellation4D")
        .def(py::init([](const py::array_t<double>& pts, const std::vector<std::uint32_t>& labels,
                         int bits) {
                 return Constellation4D(points_from_array(pts), labels, "python", bits);
             }),
             py::arg("points"), py::arg("labels"), py::arg("bits_per_symbol"))
        .def_property_readonly("points",
                               [](const Constellation4D& c) {
                                   std::vector<Point4> pts(c.size());
                                   for (std::size_t i = 0; i < c.size(); ++i) pts[i] = c.point(i);
                                   return points_to_array(pts);
                               })
        .def_property_readonly("labels",
                               [](const Constellation4D& c) {
                                   std::vector<std::uint32_t> l(c.size());
                                   for (std::size_t i = 0; i < c.size(); ++i) l[i] = c.label(i);
                                   return l;
                               })
        .def_property_readonly("bits_per_symbol", &Constellation4D::bits_per_symbol)
        .def("__len__", &Constellation4D::size);

    m.def("make_pm8qam",
          [](const std::string& variant) {
              if (variant == "star2ring") return make_pm8qam(Pm8qamVariant::kStar2Ring);
              if (variant == "hex") return make_pm8qam(Pm8qamVariant::kOptimumHex);
              throw std::invalid_argument("variant must be 'star2ring' or 'hex'");
          },
          py::arg("variant") = "star2ring");
    m.def("make_2a8psk_6b", &make_2a8psk_6b, py::arg("ring_ratio"));
    m.def("prs_seed_from_2a8psk", &prs_seed_from_2a8psk, py::arg("ring_ratio") = 0.65,
          py::arg("split_angle") = 0.05);
    m.def("load_constellation", &load_constellation, py::arg("path"));
    m.def("save_constellation", &save_constellation, py::arg("constellation"), py::arg("path"));
    m.def("distinct_sops", &distinct_sops, py::arg("constellation"), py::arg("tol") = 1e-3);
    m.def("energy_variance", &energy_variance);
    m.def("min_distance", &min_distance);

    m.def("noise_sigma2_per_dim", &noise_sigma2_per_dim, py::arg("snr_db"));
    m.def("ngmi", &ngmi, py::arg("gmi"), py::arg("bits_per_symbol"));
    m.def(
        "llr_exact",
        [](const Constellation4D& c, const py::array_t<double>& ys, double sigma2) {
            const auto pts = points_from_array(ys);
            const auto frame = llr_exact(c, pts, sigma2);
            py::array_t<double> out({static_cast<py::ssize_t>(frame.symbol_count()),
                                     static_cast<py::ssize_t>(frame.bits_per_symbol)});
            std::copy(frame.llrs.begin(), frame.llrs.end(), out.mutable_data());
            return out;
        },
        py::arg("constellation"), py::arg("symbols"), py::arg("sigma2"));
    m.def(
        "awgn_gmi_sweep",
        [](const Constellation4D& c, const std::vector<double>& snr_grid_db,
           std::size_t n_symbols, std::uint64_t seed) {
            return curve_to_dict(awgn_gmi_sweep(c, snr_grid_db, n_symbols, seed),
                                 c.bits_per_symbol());
        },
        py::arg("constellation"), py::arg("snr_grid_db"), py::arg("n_symbols"), py::arg("seed"));
    m.def(
        "required_snr_at",
        [](const Constellation4D& c, const std::vector<double>& snr_grid_db,
           std::size_t n_symbols, std::uint64_t seed, double threshold_bits) {
            const auto curve = awgn_gmi_sweep(c, snr_grid_db, n_symbols, seed);
            return required_snr_at(curve, threshold_bits);
        },
        py::arg("constellation"), py::arg("snr_grid_db"), py::arg("n_symbols"), py::arg("seed"),
        py::arg("threshold_bits"));
    m.def(
        "awgn_symbols",
        [](const py::array_t<double>& symbols, double snr_db, std::uint64_t seed) {
            const auto pts = points_from_array(symbols);
            return points_to_array(awgn_symbols(pts, SnrPoint{snr_db}, seed));
        },
        py::arg("symbols"), py::arg("snr_db"), py::arg("seed"));

    py::enum_<ShapeConstraint>(m, "ShapeConstraint")
        .value("CONSTANT_MODULUS", ShapeConstraint::kConstantModulus)
        .value("PRS_STRUCTURED", ShapeConstraint::kPrsStructured)
        .value("UNCONSTRAINED", ShapeConstraint::kUnconstrained);
    py::enum_<GradientMode>(m, "GradientMode")
        .value("FINITE_DIFFERENCE", GradientMode::kFiniteDifference)
        .value("ANALYTIC", GradientMode::kAnalytic);
    py::class_<OptimizerConfig>(m, "OptimizerConfig")
        .def(py::init<>())
        .def_readwrite("target_snr_db", &OptimizerConfig::target_snr_db)
        .def_readwrite("max_iters", &OptimizerConfig::max_iters)
        .def_readwrite("step_size", &OptimizerConfig::step_size)
        .def_readwrite("n_mc_symbols", &OptimizerConfig::n_mc_symbols)
        .def_readwrite("seed", &OptimizerConfig::seed)
        .def_readwrite("constraint", &OptimizerConfig::constraint)
        .def_readwrite("gradient", &OptimizerConfig::gradient);
    m.def(
        "optimize_gmi",
        [](const Constellation4D& c0, const OptimizerConfig& cfg) {
            auto res = optimize_gmi(c0, cfg);
            py::list trace;
            for (const auto& r : res.trace)
                trace.append(py::make_tuple(r.iter, r.gmi, r.gmi_stderr, r.step));
            return py::make_tuple(res.constellation, trace);
        },
        py::arg("start"), py::arg("config"));
    m.def("project_constant_modulus", &project_constant_modulus);
    m.def("labeling_search", &labeling_search, py::arg("constellation"), py::arg("config"));

    py::class_<LdpcCode>(m, "LdpcCode")
        .def_property_readonly("n", [](const LdpcCode& c) { return c.n(); })
        .def_property_readonly("k", [](const LdpcCode& c) { return c.k(); });
    m.def("load_code", &load_code, py::arg("path"));
    m.def(
        "ldpc_encode",
        [](const LdpcCode& code, const std::vector<std::uint8_t>& info) {
            return encode(code, info);
        },
        py::arg("code"), py::arg("info_bits"));
    m.def(
        "ldpc_decode",
        [](const LdpcCode& code, const std::vector<double>& llrs, int max_iters) {
            const auto r = decode(code, llrs, max_iters, DecodeAlgorithm::kNormalizedMinSum);
            return py::make_tuple(r.bits, r.iterations_used, r.converged);
        },
        py::arg("code"), py::arg("llrs"), py::arg("max_iters") = 50);
    m.def(
        "post_fec_chain",
        [](const Constellation4D& c, const LdpcCode& code, double snr_db, int n_frames,
           std::uint64_t seed) {
            const auto r = post_fec_chain(c, code, snr_db, n_frames, seed);
            py::dict d;
            d["pre_fec_ber"] = r.pre_fec_ber;
            d["ngmi"] = r.ngmi_value;
            d["post_fec_ber"] = r.post_fec_ber;
            d["frames"] = r.frames;
            return d;
        },
        py::arg("constellation"), py::arg("code"), py::arg("snr_db"), py::arg("n_frames"),
        py::arg("seed"));

    py::class_<Waveform>(m, "Waveform")
        .def(py::init([](const py::array_t<std::complex<double>>& x,
                         const py::array_t<std::complex<double>>& y, double sample_rate) {
                 Waveform wf;
                 wf.x = cvec_from_array(x);
                 wf.y = cvec_from_array(y);
                 wf.sample_rate = sample_rate;
                 return wf;
             }),
             py::arg("x"), py::arg("y"), py::arg("sample_rate"))
        .def_property_readonly("x", [](const Waveform& wf) { return cvec_to_array(wf.x); })
        .def_property_readonly("y", [](const Waveform& wf) { return cvec_to_array(wf.y); })
        .def_readonly("sample_rate", &Waveform::sample_rate)
        .def("__len__", &Waveform::size);

    py::class_<FiberParams>(m, "FiberParams")
        .def(py::init<>())
        .def_readwrite("length_km", &FiberParams::length_km)
        .def_readwrite("alpha_db_per_km", &FiberParams::alpha_db_per_km)
        .def_readwrite("dispersion_ps_nm_km", &FiberParams::dispersion_ps_nm_km)
        .def_readwrite("gamma_per_w_km", &FiberParams::gamma_per_w_km);
    py::class_<AmplifierModel>(m, "AmplifierModel")
        .def(py::init<>())
        .def_readwrite("gain_db", &AmplifierModel::gain_db)
        .def_readwrite("noise_figure_db", &AmplifierModel::noise_figure_db);

    m.def(
        "rrc_shape",
        [](const py::array_t<double>& symbols, double rolloff, int sps, int span_symbols,
           double symbol_rate) {
            return rrc_shape(points_from_array(symbols), rolloff, sps, span_symbols, symbol_rate);
        },
        py::arg("symbols"), py::arg("rolloff") = 0.01, py::arg("sps") = 2,
        py::arg("span_symbols") = 2048, py::arg("symbol_rate") = 41.79e9);
    m.def(
        "matched_filter_downsample",
        [](const Waveform& wf, double rolloff, int sps, int span_symbols) {
            return points_to_array(matched_filter_downsample(wf, rolloff, sps, span_symbols));
        },
        py::arg("waveform"), py::arg("rolloff") = 0.01, py::arg("sps") = 2,
        py::arg("span_symbols") = 2048);
    m.def("ssfm_propagate", &ssfm_propagate, py::arg("waveform"), py::arg("fiber"),
          py::arg("step_km") = 1.0);
    m.def("amplify", &amplify, py::arg("waveform"), py::arg("amplifier"), py::arg("seed"),
          py::arg("stream") = 0);
    m.def("average_power", &average_power);
    m.def("set_average_power", &set_average_power, py::arg("waveform"), py::arg("watts"));

    m.def("cd_apply", &cd_apply, py::arg("waveform"), py::arg("dispersion_ps_nm"),
          py::arg("wavelength_nm") = 1550.0);
    m.def("cd_compensate", &cd_compensate, py::arg("waveform"), py::arg("dispersion_ps_nm"),
          py::arg("wavelength_nm") = 1550.0);
    m.def(
        "freq_offset_recover",
        [](const Waveform& wf, double max_offset_hz) {
            auto r = freq_offset_recover(wf, max_offset_hz);
            return py::make_tuple(r.corrected, r.offset_hz, r.ambiguous);
        },
        py::arg("waveform"), py::arg("max_offset_hz"));
    m.def(
        "mimo_equalize",
        [](const Waveform& wf, const Constellation4D& c, const py::array_t<double>& training,
           int taps, double mu) {
            EqualizerState st;
            st.taps = taps;
            st.mu = mu;
            const auto tr = points_from_array(training);
            const auto out = mimo_equalize(wf, c, st, tr);
            return py::make_tuple(points_to_array(out), st.failed);
        },
        py::arg("waveform"), py::arg("constellation"), py::arg("training"), py::arg("taps") = 21,
        py::arg("mu") = 5e-5);
    m.def(
        "bps",
        [](const py::array_t<double>& symbols, const Constellation4D& c, int test_phase_count,
           int window) {
            auto r = bps(points_from_array(symbols), c, test_phase_count, window);
            return py::make_tuple(points_to_array(r.symbols), r.phase, r.cycle_slips);
        },
        py::arg("symbols"), py::arg("constellation"), py::arg("test_phase_count") = 32,
        py::arg("window") = 64);
    m.def(
        "synchronize",
        [](const py::array_t<double>& tx, const py::array_t<double>& rx) {
            const auto r = synchronize(points_from_array(tx), points_from_array(rx));
            return py::make_tuple(r.offset, r.peak_to_sidelobe, r.found);
        },
        py::arg("tx_symbols"), py::arg("rx_symbols"));
    m.def(
        "evm",
        [](const py::array_t<double>& rx, const py::array_t<double>& ref) {
            return evm(points_from_array(rx), points_from_array(ref));
        },
        py::arg("rx"), py::arg("ref"));
}
