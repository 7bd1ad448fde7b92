#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "benford.hpp"
#include "metrics.hpp"
#include "quantizer.hpp"

namespace benq {

// JSON and CSV renderings of analysis and comparison results. Field names
// are the stable report schema.

inline nlohmann::json to_json(const DigitReport& r) {
    nlohmann::json j;
    j["name"] = r.tensor_name;
    j["family"] = family_name(r.family);
    j["counts"] = r.histogram.counts;
    j["total"] = r.histogram.total;
    j["zeros"] = r.histogram.zeros_skipped;
    j["mad"] = r.mad ? nlohmann::json(*r.mad) : nlohmann::json(nullptr);
    j["signed_dev"] = r.mad ? nlohmann::json(r.signed_dev) : nlohmann::json(nullptr);
    if (r.subsample) {
        j["subsample"] = {{"seed", r.subsample->seed},
                          {"sampled", r.subsample->sampled},
                          {"population", r.subsample->population}};
    }
    return j;
}

inline nlohmann::json to_json(const ModelReport& report, const std::string& model_name) {
    nlohmann::json per_tensor = nlohmann::json::array();
    for (const auto& r : report.per_tensor) per_tensor.push_back(to_json(r));
    nlohmann::json per_family = nlohmann::json::array();
    for (const auto& f : report.per_family) {
        per_family.push_back({{"family", family_name(f.family)},
                              {"mean_mad", f.mean_mad},
                              {"median_mad", f.median_mad},
                              {"n_tensors", f.n_tensors}});
    }
    return {{"model", model_name}, {"per_tensor", per_tensor}, {"per_family", per_family}};
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

inline std::string to_csv(const ModelReport& report) {
    std::ostringstream os;
    os << "name,family,total,zeros,mad";
    for (int d = 1; d <= 9; ++d) os << ",count_" << d;
    for (int d = 1; d <= 9; ++d) os << ",dev_" << d;
    os << '\n';
    for (const auto& r : report.per_tensor) {
        os << detail::csv_field(r.tensor_name) << ',' << family_name(r.family) << ',' << r.histogram.total << ','
           << r.histogram.zeros_skipped << ',' << (r.mad ? detail::fmt_double(*r.mad) : "");
        for (auto c : r.histogram.counts) os << ',' << c;
        for (double d : r.signed_dev) os << ',' << (r.mad ? detail::fmt_double(d) : "");
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const DistortionReport& r) {
    return {{"tensor", r.tensor_name}, {"schedule", schedule_name(r.schedule)},
            {"bits", r.bits},          {"group_size", r.group_size},
            {"mse", r.mse},            {"max_abs_err", r.max_abs_err},
            {"rel_fro_err", r.rel_fro_err}};
}

inline nlohmann::json to_json(const std::vector<DistortionReport>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    return j;
}

inline std::string to_csv(const std::vector<DistortionReport>& rows) {
    std::ostringstream os;
    os << "tensor,schedule,bits,group_size,mse,max_abs_err,rel_fro_err\n";
    for (const auto& r : rows) {
        os << detail::csv_field(r.tensor_name) << ',' << schedule_name(r.schedule) << ',' << r.bits << ','
           << r.group_size << ',' << detail::fmt_double(r.mse) << ',' << detail::fmt_double(r.max_abs_err) << ','
           << detail::fmt_double(r.rel_fro_err) << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const PolicySummary& s) {
    return {{"n_tensors", s.n_tensors},
            {"n_quantized", s.n_quantized},
            {"total_params", s.total_params},
            {"quantized_params", s.quantized_params},
            {"quantized_fraction", s.quantized_fraction()},
            {"original_bytes", s.original_bits / 8},
            {"estimated_compressed_bytes", (s.compressed_bits + 7) / 8},
            {"compression_ratio", s.compression_ratio()}};
}

}  // namespace benq
