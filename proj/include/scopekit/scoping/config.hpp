#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "scopekit/core.hpp"
#include "scopekit/lm/config.hpp"

namespace scopekit::scoping {

enum class Method { SYS, SFT, DPO, PROBE, CB, SFT_CB };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::SYS: return "SYS";
        case Method::SFT: return "SFT";
        case Method::DPO: return "DPO";
        case Method::PROBE: return "PROBE";
        case Method::CB: return "CB";
        case Method::SFT_CB: return "SFT_CB";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::SYS, Method::SFT, Method::DPO, Method::PROBE, Method::CB, Method::SFT_CB})
        if (s == method_name(m)) return m;
    throw ConfigError("unknown method: " + s);
}

struct TrainConfig {
    Method method = Method::SYS;
    double learning_rate = 1e-4;
    int steps = 256;
    int batch_size = 8;
    int grad_accum = 1;  // effective batch = batch_size * grad_accum
    lm::LoraSpec lora;
    std::optional<double> dpo_beta;       // DPO only
    std::optional<double> cb_alpha_max;   // CB / SFT_CB only
    std::set<int> cb_target_layers;       // empty -> depth-fraction defaults
    std::uint64_t seed = 0;

    // Tuned defaults: CB 1e-4/128, SFT 1e-4/256, DPO 1e-5/512, Probe 1e-5/256.
    static TrainConfig defaults(Method m, std::uint64_t seed = 0) {
        TrainConfig c;
        c.method = m;
        c.seed = seed;
        switch (m) {
            case Method::SYS:
                c.steps = 0;
                break;
            case Method::SFT:
                c.learning_rate = 1e-4;
                c.steps = 256;
                break;
            case Method::DPO:
                c.learning_rate = 1e-5;
                c.steps = 512;
                c.dpo_beta = 0.1;
                break;
            case Method::PROBE:
                c.learning_rate = 1e-5;
                c.steps = 256;
                break;
            case Method::CB:
            case Method::SFT_CB:
                c.learning_rate = 1e-4;
                c.steps = 128;
                c.cb_alpha_max = 10.0;
                break;
        }
        return c;
    }

    void validate(int n_layers) const {
        if (method != Method::SYS) {
            if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
            if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
            if (batch_size < 1 || grad_accum < 1) throw ConfigError("TrainConfig: batch sizing out of range");
        }
        bool needs_beta = method == Method::DPO;
        if (needs_beta != dpo_beta.has_value())
            throw ConfigError(needs_beta ? "TrainConfig: DPO requires dpo_beta"
                                         : "TrainConfig: dpo_beta is only valid for DPO");
        if (dpo_beta && *dpo_beta <= 0.0) throw ConfigError("TrainConfig: dpo_beta must be positive");
        bool needs_cb = method == Method::CB || method == Method::SFT_CB;
        if (needs_cb != cb_alpha_max.has_value())
            throw ConfigError(needs_cb ? "TrainConfig: CB requires cb_alpha_max"
                                       : "TrainConfig: cb_alpha_max is only valid for CB methods");
        if (cb_alpha_max && *cb_alpha_max <= 0.0) throw ConfigError("TrainConfig: cb_alpha_max must be positive");
        if (!cb_target_layers.empty()) {
            if (!needs_cb) throw ConfigError("TrainConfig: cb_target_layers is only valid for CB methods");
            for (int l : cb_target_layers)
                if (l < 0 || l > n_layers) throw ConfigError("TrainConfig: cb target layer out of range");
        }
        if (method == Method::SFT || method == Method::DPO || method == Method::CB || method == Method::SFT_CB)
            lora.validate(n_layers);
    }

    std::set<int> resolved_cb_targets(int n_layers) const {
        return cb_target_layers.empty() ? lm::rerouting_target_layers(n_layers) : cb_target_layers;
    }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["method"] = method_name(c.method);
    j["learning_rate"] = c.learning_rate;
    j["steps"] = c.steps;
    j["batch_size"] = c.batch_size;
    j["grad_accum"] = c.grad_accum;
    j["lora"] = {{"rank", c.lora.rank},
                 {"scaling_alpha", c.lora.scaling_alpha},
                 {"dropout", c.lora.dropout},
                 {"layer_begin", c.lora.layer_begin},
                 {"layer_end", c.lora.layer_end},
                 {"target_attention", c.lora.target_attention},
                 {"target_mlp", c.lora.target_mlp}};
    if (c.dpo_beta) j["dpo_beta"] = *c.dpo_beta;
    if (c.cb_alpha_max) j["cb_alpha_max"] = *c.cb_alpha_max;
    if (!c.cb_target_layers.empty()) j["cb_target_layers"] = c.cb_target_layers;
    j["seed"] = c.seed;
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c = TrainConfig::defaults(parse_method(j.at("method").get<std::string>()));
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("steps")) c.steps = j["steps"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("grad_accum")) c.grad_accum = j["grad_accum"].get<int>();
    if (j.contains("lora")) {
        const auto& l = j["lora"];
        c.lora.rank = l.value("rank", 16);
        c.lora.scaling_alpha = l.value("scaling_alpha", 16.0);
        c.lora.dropout = l.value("dropout", 0.05);
        c.lora.layer_begin = l.value("layer_begin", 0);
        c.lora.layer_end = l.value("layer_end", 0);
        c.lora.target_attention = l.value("target_attention", true);
        c.lora.target_mlp = l.value("target_mlp", true);
    }
    if (j.contains("dpo_beta")) c.dpo_beta = j["dpo_beta"].get<double>();
    if (j.contains("cb_alpha_max")) c.cb_alpha_max = j["cb_alpha_max"].get<double>();
    if (j.contains("cb_target_layers"))
        c.cb_target_layers = j["cb_target_layers"].get<std::set<int>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

}  // namespace scopekit::scoping
