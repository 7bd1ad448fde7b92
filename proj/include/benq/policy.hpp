#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "digest.hpp"
#include "error.hpp"

namespace benq {

enum class Family { AttentionLinear, MlpLinear, Norm, Embedding, Bias, Other };

inline constexpr Family kAllFamilies[] = {Family::AttentionLinear, Family::MlpLinear, Family::Norm,
                                          Family::Embedding,       Family::Bias,      Family::Other};

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::AttentionLinear: return "AttentionLinear";
        case Family::MlpLinear: return "MlpLinear";
        case Family::Norm: return "Norm";
        case Family::Embedding: return "Embedding";
        case Family::Bias: return "Bias";
        case Family::Other: return "Other";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    for (Family f : kAllFamilies) {
        if (family_name(f) == s) return f;
    }
    throw ConfigError("unknown layer family '" + std::string(s) + "'");
}

/// A name matches when it contains any of `contains` or ends with any of `suffixes`.
struct FamilyRule {
    Family family;
    std::vector<std::string> contains;
    std::vector<std::string> suffixes;

    bool matches(std::string_view name) const {
        for (const auto& p : suffixes) {
            if (name.ends_with(p)) return true;
        }
        for (const auto& p : contains) {
            if (name.find(p) != std::string_view::npos) return true;
        }
        return false;
    }
};

enum class PolicyDefault { Skip, Quantize };

/// Which tensors get quantized, plus the family taxonomy used by reports.
/// A skip match always beats a quantize match.
struct QuantPolicy {
    std::vector<std::string> quantize_patterns;
    std::vector<std::string> skip_patterns;
    PolicyDefault fallback = PolicyDefault::Skip;
    std::vector<FamilyRule> families;

    bool should_quantize(std::string_view name) const {
        auto hit = [&](const std::vector<std::string>& pats) {
            return std::any_of(pats.begin(), pats.end(),
                               [&](const std::string& p) { return name.find(p) != std::string_view::npos; });
        };
        if (hit(skip_patterns)) return false;
        if (hit(quantize_patterns)) return true;
        return fallback == PolicyDefault::Quantize;
    }

    /// Mirrors the benchmark setup: attention/MLP matrices are quantized,
    /// norms, embeddings and biases stay at native precision.
    static QuantPolicy selective() {
        QuantPolicy p;
        p.quantize_patterns = {"q_proj", "k_proj",  "v_proj",    "o_proj",  "attn",      "attention", "query_key_value",
                               "fc",     "mlp",     "gate_proj", "up_proj", "down_proj", "dense"};
        p.skip_patterns = {"norm", "ln", "embed", "wte", "wpe", "lm_head", ".bias"};
        p.fallback = PolicyDefault::Skip;
        p.families = default_family_rules();
        return p;
    }

    /// Quantizes every tensor; families still classified with the default table.
    static QuantPolicy quantize_all() {
        QuantPolicy p;
        p.fallback = PolicyDefault::Quantize;
        p.families = default_family_rules();
        return p;
    }

    // First match wins. Norm precedes attention so OPT's "self_attn_layer_norm"
    // is a norm.
    static std::vector<FamilyRule> default_family_rules() {
        return {
            {Family::Bias, {}, {".bias"}},
            {Family::Norm, {"norm", "ln"}, {}},
            {Family::Embedding, {"embed", "wte", "wpe", "lm_head"}, {}},
            {Family::AttentionLinear, {"q_proj", "k_proj", "v_proj", "o_proj", "attn", "attention", "query_key_value"}, {}},
            {Family::MlpLinear, {"fc", "mlp", "gate_proj", "up_proj", "down_proj", "dense"}, {}},
        };
    }

    nlohmann::json to_json() const {
        nlohmann::json fams = nlohmann::json::array();
        for (const auto& r : families) {
            fams.push_back({{"family", family_name(r.family)}, {"contains", r.contains}, {"suffixes", r.suffixes}});
        }
        return {{"quantize_patterns", quantize_patterns},
                {"skip_patterns", skip_patterns},
                {"default", fallback == PolicyDefault::Skip ? "skip" : "quantize"},
                {"families", fams}};
    }

    std::string digest() const { return fnv1a64_hex(to_json().dump()); }

    /// Parses a policy file. Missing "families" falls back to the default table.
    static QuantPolicy from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("policy must be a JSON object");
        QuantPolicy p;
        try {
            p.quantize_patterns = j.value("quantize_patterns", std::vector<std::string>{});
            p.skip_patterns = j.value("skip_patterns", std::vector<std::string>{});
            const std::string def = j.value("default", std::string("skip"));
            if (def == "skip") {
                p.fallback = PolicyDefault::Skip;
            } else if (def == "quantize") {
                p.fallback = PolicyDefault::Quantize;
            } else {
                throw ConfigError("policy default must be 'skip' or 'quantize', got '" + def + "'");
            }
            if (j.contains("families")) {
                for (const auto& f : j.at("families")) {
                    p.families.push_back({parse_family(f.at("family").get<std::string>()),
                                          f.value("contains", std::vector<std::string>{}),
                                          f.value("suffixes", std::vector<std::string>{})});
                }
            } else {
                p.families = default_family_rules();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed policy: ") + e.what());
        }
        return p;
    }
};

inline Family classify_family(std::string_view tensor_name, const QuantPolicy& policy) {
    for (const auto& rule : policy.families) {
        if (rule.matches(tensor_name)) return rule.family;
    }
    return Family::Other;
}

}  // namespace benq
