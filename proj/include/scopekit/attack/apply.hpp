#pragma once

// Glue between attack specs and evaluation: turns (spec, instance) into the
// conversation actually sent to the target. TAP is driven separately by the
// search harness.

#include <functional>
#include <optional>
#include <vector>

#include "scopekit/attack/tap.hpp"
#include "scopekit/attack/transforms.hpp"
#include "scopekit/data/plan.hpp"

namespace scopekit::attack {

struct AttackSpec {
    AttackKind kind = AttackKind::NONE;
    int fewshot_k = 1;       // FEWSHOT
    std::uint64_t seed = 0;  // shot / accept-example selection
    TapConfig tap;           // TAP

    void validate() const {
        if (kind == AttackKind::FEWSHOT && fewshot_k < 1)
            throw ConfigError("AttackSpec: fewshot_k must be >= 1");
        if (kind == AttackKind::TAP &&
            (tap.branching_factor < 1 || tap.width < 1 || tap.depth < 1))
            throw ConfigError("AttackSpec: TAP tree parameters must be positive");
    }
};

struct AttackContext {
    // training accept instances; the two-turn attacks draw their first turn here
    const std::vector<data::PromptInstance>* accept_train = nullptr;
    // (query, completion) pool for few-shot demonstrations, keyed per instance
    std::function<const std::vector<data::PromptInstance>*(const data::PromptInstance&)> fewshot_pool;
};

// Builds the conversation for every non-TAP attack. The genuine system
// prompt comes from the plan and is never edited.
inline data::Conversation apply_attack(const AttackSpec& spec, const data::PromptInstance& instance,
                                       const data::ScopePlan& plan, const AttackContext& ctx) {
    spec.validate();
    data::Conversation conv;
    conv.system = plan.system_prompt();
    switch (spec.kind) {
        case AttackKind::NONE:
            conv.turns.push_back({instance.instruction, std::nullopt});
            return conv;
        case AttackKind::ADV_SYS:
            conv.turns.push_back({attack_adv_system(instance.instruction, instance.category), std::nullopt});
            return conv;
        case AttackKind::B64:
            conv.turns.push_back({attack_b64(instance.instruction), std::nullopt});
            return conv;
        case AttackKind::FEWSHOT: {
            if (!ctx.fewshot_pool) throw ConfigError("apply_attack: fewshot needs a demonstration pool");
            const std::vector<data::PromptInstance>* pool = ctx.fewshot_pool(instance);
            if (!pool) throw ConfigError("apply_attack: no demonstration pool for task " + instance.task_id);
            conv.turns.push_back({attack_fewshot(instance, spec.fewshot_k, *pool, spec.seed), std::nullopt});
            return conv;
        }
        case AttackKind::TWO_TURN:
        case AttackKind::TWO_TURN_SYS: {
            if (!ctx.accept_train || ctx.accept_train->empty())
                throw ConfigError("apply_attack: two-turn attacks need the accept training pool");
            Rng rng(mix_seed(spec.seed, "two-turn:" + instance.instruction));
            const data::PromptInstance& example =
                (*ctx.accept_train)[static_cast<std::size_t>(rng.next_below(ctx.accept_train->size()))];
            conv.turns = attack_two_turn(instance, example, spec.kind == AttackKind::TWO_TURN_SYS);
            return conv;
        }
        case AttackKind::PREFILL:
            conv.turns.push_back({attack_prefill(instance.instruction), std::nullopt});
            return conv;
        case AttackKind::TAP:
            throw ConfigError("apply_attack: TAP runs through the search harness, not as a transformation");
    }
    throw ConfigError("apply_attack: unknown attack kind");
}

inline nlohmann::json attack_spec_to_json(const AttackSpec& s) {
    nlohmann::json j = {{"kind", attack_name(s.kind)}};
    if (s.kind == AttackKind::FEWSHOT) j["fewshot_k"] = s.fewshot_k;
    if (s.seed) j["seed"] = s.seed;
    if (s.kind == AttackKind::TAP) {
        j["tap"] = {{"branching_factor", s.tap.branching_factor},
                    {"width", s.tap.width},
                    {"depth", s.tap.depth},
                    {"target_string", s.tap.target_string},
                    {"seed", s.tap.seed}};
    }
    return j;
}

inline AttackSpec attack_spec_from_json(const nlohmann::json& j) {
    AttackSpec s;
    if (j.is_string()) {
        s.kind = parse_attack(j.get<std::string>());
        return s;
    }
    s.kind = parse_attack(j.at("kind").get<std::string>());
    s.fewshot_k = j.value("fewshot_k", 1);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("tap")) {
        const auto& t = j["tap"];
        s.tap.branching_factor = t.value("branching_factor", 2);
        s.tap.width = t.value("width", 10);
        s.tap.depth = t.value("depth", 2);
        s.tap.target_string = t.value("target_string", std::string("Sure, "));
        s.tap.seed = t.value("seed", std::uint64_t{0});
    }
    return s;
}

}  // namespace scopekit::attack
