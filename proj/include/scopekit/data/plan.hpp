#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopekit/core.hpp"
#include "scopekit/data/prompt.hpp"
#include "scopekit/data/task.hpp"

namespace scopekit::data {

enum class Role { accept, id_reject, ood_reject };
enum class Split { train, val };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::accept: return "accept";
        case Role::id_reject: return "id_reject";
        case Role::ood_reject: return "ood_reject";
    }
    return "?";
}

inline Role parse_role(const std::string& s) {
    if (s == "accept") return Role::accept;
    if (s == "id_reject") return Role::id_reject;
    if (s == "ood_reject") return Role::ood_reject;
    throw ConfigError("unknown role: " + s);
}

struct FinegrainedSpec {
    Category category = Category::SA;
    std::string held_task_id;
    bool include_fr_in_reject = true;
};

// The accept/reject mixture declaration. Category lists keep declaration
// order (it decides the wording of the system prompt).
struct ScopePlan {
    std::vector<Category> accept;
    std::vector<Category> reject;
    int n_accept = 2048;
    int n_reject = 2048;
    double val_fraction = 0.25;
    std::uint64_t seed = 0;
    std::optional<FinegrainedSpec> finegrained;

    void validate() const {
        if (accept.empty()) throw ConfigError("ScopePlan: accept set is empty");
        for (Category c : accept)
            if (std::count(accept.begin(), accept.end(), c) > 1)
                throw ConfigError("ScopePlan: duplicate accept category");
        for (Category c : reject) {
            if (std::count(reject.begin(), reject.end(), c) > 1)
                throw ConfigError("ScopePlan: duplicate reject category");
            if (std::count(accept.begin(), accept.end(), c) > 0)
                throw ConfigError("ScopePlan: accept and reject sets must be disjoint");
        }
        for (Category c : accept)
            if (ood_only(c))
                throw ConfigError(std::string("ScopePlan: ") + category_token(c) +
                                  " is evaluation-only and cannot be an accept category");
        for (Category c : reject)
            if (ood_only(c))
                throw ConfigError(std::string("ScopePlan: ") + category_token(c) +
                                  " is evaluation-only and cannot be a reject category");
        if (n_accept < 1 || n_reject < 0) throw ConfigError("ScopePlan: instance counts out of range");
        if (val_fraction < 0.20) throw ConfigError("ScopePlan: val_fraction must be >= 0.20");
        if (finegrained) {
            if (std::count(accept.begin(), accept.end(), finegrained->category) == 0)
                throw ConfigError("ScopePlan: finegrained category must be in the accept set");
            if (finegrained->held_task_id.empty()) throw ConfigError("ScopePlan: finegrained held_task_id empty");
        }
    }

    bool in_accept(Category c) const { return std::count(accept.begin(), accept.end(), c) > 0; }
    bool in_reject(Category c) const { return std::count(reject.begin(), reject.end(), c) > 0; }

    std::string system_prompt() const {
        std::vector<std::string> names;
        for (Category c : accept) names.emplace_back(category_display_name(c));
        return make_system_prompt(names);
    }

    // The OOD group: every evaluation category absent from accept and reject
    // (always includes the below-divider categories).
    std::vector<Category> ood_categories() const {
        std::vector<Category> out;
        for (Category c : kAllCategories)
            if (!in_accept(c) && !in_reject(c)) out.push_back(c);
        return out;
    }
};

struct PromptInstance {
    std::string task_id;
    std::string dataset_id;
    Category category = Category::SA;
    Role role = Role::accept;
    Split split = Split::train;
    std::string system_prompt;
    std::string instruction;  // task definition + instance input
    std::string input;        // raw instance input
    std::string gold;         // primary reference output
    std::vector<std::string> refs;
};

// instruction = definition + newline + input; an empty input leaves the
// definition alone with no trailing separator.
inline std::string make_instruction(const std::string& definition, const std::string& input) {
    return input.empty() ? definition : definition + "\n" + input;
}

// Single-turn chat-formatted text for one instance under a plan.
inline std::string format_prompt(const PromptInstance& instance, const ScopePlan& plan) {
    Conversation conv;
    conv.system = plan.system_prompt();
    conv.turns.push_back({instance.instruction, std::nullopt});
    return render_text(conv);
}

// ---- JSON forms (plan files and split manifests) ----

inline nlohmann::json plan_to_json(const ScopePlan& p) {
    nlohmann::json j;
    for (Category c : p.accept) j["accept"].push_back(category_token(c));
    j["reject"] = nlohmann::json::array();
    for (Category c : p.reject) j["reject"].push_back(category_token(c));
    j["n_accept"] = p.n_accept;
    j["n_reject"] = p.n_reject;
    j["val_fraction"] = p.val_fraction;
    j["seed"] = p.seed;
    if (p.finegrained) {
        j["finegrained"] = {{"category", category_token(p.finegrained->category)},
                            {"held_task_id", p.finegrained->held_task_id},
                            {"include_fr_in_reject", p.finegrained->include_fr_in_reject}};
    }
    return j;
}

inline ScopePlan plan_from_json(const nlohmann::json& j) {
    ScopePlan p;
    for (const auto& c : j.at("accept")) p.accept.push_back(parse_category(c.get<std::string>()));
    if (j.contains("reject"))
        for (const auto& c : j.at("reject")) p.reject.push_back(parse_category(c.get<std::string>()));
    p.n_accept = j.value("n_accept", 2048);
    p.n_reject = j.value("n_reject", 2048);
    p.val_fraction = j.value("val_fraction", 0.25);
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("finegrained")) {
        FinegrainedSpec f;
        f.category = parse_category(j["finegrained"].at("category").get<std::string>());
        f.held_task_id = j["finegrained"].at("held_task_id").get<std::string>();
        f.include_fr_in_reject = j["finegrained"].value("include_fr_in_reject", true);
        p.finegrained = f;
    }
    p.validate();
    return p;
}

inline nlohmann::json instance_to_json(const PromptInstance& pi) {
    nlohmann::json j;
    j["task_id"] = pi.task_id;
    j["dataset_id"] = pi.dataset_id;
    j["category"] = category_token(pi.category);
    j["role"] = role_name(pi.role);
    j["split"] = pi.split == Split::train ? "train" : "val";
    j["instruction"] = pi.instruction;
    j["input"] = pi.input;
    j["gold"] = pi.gold;
    j["refs"] = pi.refs;
    return j;
}

inline PromptInstance instance_from_json(const nlohmann::json& j, const std::string& system_prompt) {
    PromptInstance pi;
    pi.task_id = j.at("task_id").get<std::string>();
    pi.dataset_id = j.at("dataset_id").get<std::string>();
    pi.category = parse_category(j.at("category").get<std::string>());
    pi.role = parse_role(j.at("role").get<std::string>());
    pi.split = j.at("split").get<std::string>() == "train" ? Split::train : Split::val;
    pi.instruction = j.at("instruction").get<std::string>();
    pi.input = j.at("input").get<std::string>();
    pi.gold = j.at("gold").get<std::string>();
    pi.refs = j.at("refs").get<std::vector<std::string>>();
    pi.system_prompt = system_prompt;
    return pi;
}

}  // namespace scopekit::data
