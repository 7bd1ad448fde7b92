// benq: command-line front end.
//
//   benq levels     --bits B --schedule {log,linear} [--epsilon E]
//   benq analyze    <container> [--policy P] [--out report.json] [--csv report.csv]
//   benq quantize   <container> [--bits B] [--group-size G] [--schedule S] [--epsilon E]
//                   [--policy P | --no-policy] --out model.benq
//   benq dequantize <model.benq> --out container.safetensors
//   benq compare    <container> [--bits B,..] [--schedules log,linear,rtn] [--group-size G,..]
//                   [--tensor NAME] [--policy P] [--csv FILE] [--out FILE]
//   benq synth      NAME=SPEC... [--dtype F32|F16] --out container.safetensors
//
// Exit codes: 0 success, 1 data/IO error, 2 usage error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "benq/benq.hpp"

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Globals {
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string manifest;
};

// Collected for every run; identical inputs give identical manifests apart
// from "timings".
struct RunManifest {
    std::string command;
    json config = json::object();
    json inputs = json::array();
    json timings = json::object();
    std::uint64_t seed = 0;

    void add_input(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw benq::IoError("cannot open '" + path.string() + "'");
        benq::Fnv1a64 h;
        std::vector<char> buf(1 << 20);
        while (in) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            h.update(std::as_bytes(std::span(buf.data(), static_cast<std::size_t>(in.gcount()))));
        }
        inputs.push_back({{"path", path.string()}, {"fnv1a64", h.hex()}});
    }

    template <typename F>
    auto timed(const std::string& phase, F&& f) {
        const auto t0 = Clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            timings[phase] = std::chrono::duration<double>(Clock::now() - t0).count();
        } else {
            auto r = f();
            timings[phase] = std::chrono::duration<double>(Clock::now() - t0).count();
            return r;
        }
    }

    json to_json() const {
        return {{"command", command},   {"config", config}, {"inputs", inputs},
                {"tool_version", benq::kVersion}, {"timings", timings}, {"seed", seed}};
    }
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        benq::write_file_atomic(path, text);
    }
}

benq::QuantPolicy load_policy(const std::string& path) {
    try {
        return benq::QuantPolicy::from_json(json::parse(benq::read_file(path)));
    } catch (const json::exception& e) {
        throw benq::ConfigError("policy file '" + path + "' is not valid JSON: " + e.what());
    }
}

benq::NamedTensors load_container(const std::string& path) {
    auto c = benq::read_container(path);
    for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
    return std::move(c.tensors);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int parse_int(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw benq::ConfigError(std::string("invalid ") + what + " '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benford-guided weight quantization and digit analysis"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", benq::kVersion);

    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (default: BENQ_THREADS or all cores)");
    app.add_option("--seed", g.seed, "Seed for subsampling and synthesis");
    app.add_option("--out", g.out, "Output path");
    app.add_option("--manifest", g.manifest, "Write the run manifest here (default: stderr)");

    // levels
    auto* levels = app.add_subcommand("levels", "Print a codebook as JSON");
    int lv_bits = benq::kDefaultBits;
    std::string lv_schedule = "log";
    double lv_epsilon = benq::kDefaultEpsilon;
    levels->add_option("--bits", lv_bits, "Bit width (2..8)");
    levels->add_option("--schedule", lv_schedule, "log or linear");
    levels->add_option("--epsilon", lv_epsilon, "Smallest positive log-uniform level");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "First-digit / MAD report for a safetensors container");
    std::string an_input, an_policy, an_csv;
    analyze->add_option("container", an_input, "safetensors file")->required();
    analyze->add_option("--policy", an_policy, "Policy JSON (family table)");
    analyze->add_option("--csv", an_csv, "Also write per-tensor rows as CSV");

    // quantize
    auto* quantize = app.add_subcommand("quantize", "Quantize a container into a .benq file");
    std::string q_input, q_schedule = "log", q_policy;
    int q_bits = benq::kDefaultBits;
    std::size_t q_group = benq::kDefaultGroupSize;
    double q_epsilon = benq::kDefaultEpsilon;
    bool q_no_policy = false;
    quantize->add_option("container", q_input, "safetensors file")->required();
    quantize->add_option("--bits", q_bits, "Bit width (2..8)");
    quantize->add_option("--group-size", q_group, "Elements per scale group");
    quantize->add_option("--schedule", q_schedule, "log, linear or rtn");
    quantize->add_option("--epsilon", q_epsilon, "Smallest positive log-uniform level");
    auto* q_policy_opt = quantize->add_option("--policy", q_policy, "Policy JSON");
    quantize->add_flag("--no-policy", q_no_policy, "Quantize every tensor")->excludes(q_policy_opt);

    // dequantize
    auto* dequant = app.add_subcommand("dequantize", "Expand a .benq file to an FP32 safetensors container");
    std::string dq_input;
    dequant->add_option("model", dq_input, ".benq file")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Distortion of several schedules on the same tensors");
    std::string c_input, c_bits = "4", c_schedules = "log,linear,rtn", c_groups = "128", c_tensor, c_policy, c_csv;
    double c_epsilon = benq::kDefaultEpsilon;
    compare->add_option("container", c_input, "safetensors file")->required();
    compare->add_option("--bits", c_bits, "Comma-separated bit widths");
    compare->add_option("--schedules", c_schedules, "Comma-separated schedules");
    compare->add_option("--group-size", c_groups, "Comma-separated group sizes");
    compare->add_option("--epsilon", c_epsilon, "Smallest positive log-uniform level");
    compare->add_option("--tensor", c_tensor, "Only this tensor");
    compare->add_option("--policy", c_policy, "Only tensors this policy quantizes");
    compare->add_option("--csv", c_csv, "Write CSV here");

    // synth
    auto* synth = app.add_subcommand("synth", "Write synthetic tensors to a safetensors container");
    std::vector<std::string> s_specs;
    std::string s_dtype = "F32";
    synth->add_option("tensors", s_specs, "NAME=SPEC, e.g. w=loguniform:6:1000000 or n=constant:0.35:64x64")
        ->required();
    synth->add_option("--dtype", s_dtype, "F32 or F16");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::size_t threads = g.threads ? g.threads : benq::default_thread_count();
    RunManifest manifest;
    manifest.seed = g.seed;

    try {
        if (*levels) {
            manifest.command = "levels";
            const auto schedule = benq::parse_schedule(lv_schedule);
            if (schedule == benq::Schedule::UniformRTN) throw benq::ConfigError("levels: schedule must be log or linear");
            const auto cb = benq::make_codebook(schedule, lv_bits, lv_epsilon);
            json j = {{"schedule", benq::schedule_name(schedule)},
                      {"bits", cb.bits()},
                      {"levels", std::vector<double>(cb.levels().begin(), cb.levels().end())}};
            if (schedule == benq::Schedule::LogUniform) j["epsilon"] = cb.epsilon();
            manifest.config = {{"bits", lv_bits}, {"schedule", lv_schedule}, {"epsilon", lv_epsilon}};
            emit(g.out, j.dump(2) + "\n");
        } else if (*analyze) {
            manifest.command = "analyze";
            const auto policy = an_policy.empty() ? benq::QuantPolicy::selective() : load_policy(an_policy);
            manifest.add_input(an_input);
            if (!an_policy.empty()) manifest.add_input(an_policy);
            manifest.config = {{"policy_digest", policy.digest()}};
            const auto tensors = manifest.timed("read", [&] { return load_container(an_input); });
            if (tensors.empty()) throw benq::DataError("'" + an_input + "' contains no tensors to analyze");
            benq::AnalyzeOptions opts;
            opts.seed = g.seed;
            opts.threads = threads;
            const auto report = manifest.timed("analyze", [&] { return benq::model_report(tensors, policy, opts); });
            emit(g.out, benq::to_json(report, std::filesystem::path(an_input).filename().string()).dump(2) + "\n");
            if (!an_csv.empty()) benq::write_file_atomic(an_csv, benq::to_csv(report));
            for (const auto& f : report.per_family) {
                std::cerr << benq::family_name(f.family) << ": mean MAD " << f.mean_mad << ", median "
                          << f.median_mad << " (" << f.n_tensors << " tensors)\n";
            }
        } else if (*quantize) {
            manifest.command = "quantize";
            if (g.out.empty()) throw benq::ConfigError("quantize: --out is required");
            benq::QuantConfig cfg{q_bits, q_group, benq::parse_schedule(q_schedule), q_epsilon};
            cfg.validate();
            const auto policy = q_no_policy          ? benq::QuantPolicy::quantize_all()
                                : q_policy.empty() ? benq::QuantPolicy::selective()
                                                   : load_policy(q_policy);
            manifest.add_input(q_input);
            if (!q_policy.empty()) manifest.add_input(q_policy);
            manifest.config = {{"bits", cfg.bits},
                               {"group_size", cfg.group_size},
                               {"schedule", benq::schedule_name(cfg.schedule)},
                               {"epsilon", cfg.epsilon},
                               {"policy_digest", policy.digest()}};
            const auto tensors = manifest.timed("read", [&] { return load_container(q_input); });
            if (tensors.empty()) throw benq::DataError("'" + q_input + "' contains no tensors to quantize");
            const auto result =
                manifest.timed("quantize", [&] { return benq::apply_policy(tensors, policy, cfg, threads); });
            manifest.timed("write", [&] { benq::write_benq(result.model, g.out); });
            std::cerr << "quantization pass: " << manifest.timings["quantize"].get<double>() << " s ("
                      << result.summary.n_quantized << "/" << result.summary.n_tensors << " tensors)\n";
            std::cout << benq::to_json(result.summary).dump(2) << "\n";
        } else if (*dequant) {
            manifest.command = "dequantize";
            if (g.out.empty()) throw benq::ConfigError("dequantize: --out is required");
            manifest.add_input(dq_input);
            const auto model = manifest.timed("read", [&] { return benq::read_benq(dq_input); });
            const auto tensors = manifest.timed("dequantize", [&] { return benq::dequantize_model(model); });
            manifest.timed("write", [&] { benq::write_container(g.out, tensors); });
        } else if (*compare) {
            manifest.command = "compare";
            std::vector<benq::QuantConfig> configs;
            for (const auto& b : split_list(c_bits)) {
                for (const auto& gs : split_list(c_groups)) {
                    for (const auto& s : split_list(c_schedules)) {
                        const int group = parse_int(gs, "group size");
                        if (group < 1) throw benq::ConfigError("group size must be >= 1");
                        benq::QuantConfig cfg{parse_int(b, "bit width"), static_cast<std::size_t>(group),
                                              benq::parse_schedule(s), c_epsilon};
                        cfg.validate();
                        configs.push_back(cfg);
                    }
                }
            }
            if (configs.empty()) throw benq::ConfigError("compare: no configurations selected");
            manifest.add_input(c_input);
            if (!c_policy.empty()) manifest.add_input(c_policy);
            manifest.config = {{"bits", c_bits}, {"schedules", c_schedules}, {"group_size", c_groups},
                               {"epsilon", c_epsilon}, {"tensor", c_tensor}};
            const auto tensors = manifest.timed("read", [&] { return load_container(c_input); });
            std::optional<benq::QuantPolicy> policy;
            if (!c_policy.empty()) policy = load_policy(c_policy);

            std::vector<const benq::WeightTensor*> selected;
            for (const auto& t : tensors) {
                if (t.numel() == 0) continue;
                if (!c_tensor.empty() && t.name != c_tensor) continue;
                if (policy && !policy->should_quantize(t.name)) continue;
                selected.push_back(&t);
            }
            if (selected.empty()) {
                throw benq::ConfigError(c_tensor.empty() ? "compare: no tensors selected"
                                                         : "compare: no non-empty tensor named '" + c_tensor + "'");
            }

            std::vector<std::vector<benq::DistortionReport>> per(selected.size());
            manifest.timed("compare", [&] {
                benq::parallel_for(selected.size(), threads,
                                   [&](std::size_t i) { per[i] = benq::compare_schedules(*selected[i], configs); });
            });
            std::vector<benq::DistortionReport> rows;
            for (const auto& r : per) rows.insert(rows.end(), r.begin(), r.end());
            if (!c_csv.empty() || g.out.empty()) emit(c_csv, benq::to_csv(rows));
            if (!g.out.empty()) emit(g.out, benq::to_json(rows).dump(2) + "\n");
        } else if (*synth) {
            manifest.command = "synth";
            if (g.out.empty()) throw benq::ConfigError("synth: --out is required");
            const auto dtype = benq::parse_dtype(s_dtype);
            if (dtype == benq::DType::BF16) throw benq::ConfigError("synth: --dtype must be F32 or F16");
            benq::NamedTensors tensors;
            for (const auto& item : s_specs) {
                const auto eq = item.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw benq::ConfigError("synth: expected NAME=SPEC, got '" + item + "'");
                }
                const auto spec = benq::SynthSpec::parse(item.substr(eq + 1));
                const auto values = benq::synth_values(spec, g.seed);
                auto name = item.substr(0, eq);
                tensors.push_back(dtype == benq::DType::F16
                                      ? benq::WeightTensor::from_values_f16(name, spec.shape, values)
                                      : benq::WeightTensor::from_values(name, spec.shape, values));
            }
            manifest.config = {{"tensors", s_specs}, {"dtype", s_dtype}};
            benq::write_container(g.out, tensors, {{"generator", "benq synth"}, {"seed", std::to_string(g.seed)}});
        }
    } catch (const benq::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        const std::string m = manifest.to_json().dump();
        if (g.manifest.empty()) {
            std::cerr << "manifest: " << m << '\n';
        } else {
            benq::write_file_atomic(g.manifest, m + "\n");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
