#pragma once

// Evaluation protocol: greedy generation per heldout instance, per-method
// rejection judgment, task scoring on accept-role sets, and aggregation of
// rejection rates into Accept / ID Reject / OOD Reject.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scopekit/attack/apply.hpp"
#include "scopekit/data/splits.hpp"
#include "scopekit/detect/detector.hpp"
#include "scopekit/eval/metrics.hpp"
#include "scopekit/scoping/trainer.hpp"

namespace scopekit::eval {

struct EvalCell {
    std::string label;  // eval-set label (category token, or "<cat>-FA"/"<cat>-FR")
    data::Category category = data::Category::SA;
    data::Role role = data::Role::ood_reject;
    std::string attack = "none";
    int n = 0;
    int n_rejected = 0;
    int n_failed = 0;        // generation failures, excluded from n
    double score_sum = 0.0;  // task metric accumulated over accept-role instances

    double rejection_rate() const { return n > 0 ? static_cast<double>(n_rejected) / n : 0.0; }
    double accept_score() const { return n > 0 ? score_sum / n : 0.0; }
};

struct InstanceRecord {
    std::string task_id;
    std::string prompt_text;
    std::string completion;
    detect::Verdict verdict;
    double score = 0.0;
    bool failed = false;
    std::string error;
};

struct EvalSetResult {
    EvalCell cell;
    std::vector<InstanceRecord> records;
};

struct EvalOptions {
    int max_new_tokens = 48;
    detect::DetectorConfig detector;
    std::uint64_t seed = 0;
};

namespace detail {

inline const lm::Model* generation_model(const lm::Model& base, const scoping::ScopedArtifact& artifact,
                                         lm::Model& storage) {
    if (artifact.adapter) {
        storage = base;
        storage.adapter = &*artifact.adapter;
        return &storage;
    }
    return &base;  // SYS and PROBE generate from the untouched base
}

inline bool probe_decision(const scoping::ScopedArtifact& artifact, const lm::Model& base,
                           const std::vector<int>& prompt_tokens) {
    auto [logits, trace] = lm::forward_with_trace(base, prompt_tokens);
    return artifact.probe->decide_reject(scoping::probe_features(trace).values);
}

}  // namespace detail

// One (eval set, attack) cell. Generation failures are logged and excluded
// from the counts.
inline EvalSetResult evaluate_split(const lm::Model& base, const scoping::ScopedArtifact& artifact,
                                    const data::EvalSet& set, const data::ScopePlan& plan,
                                    const attack::AttackSpec& attack_spec, const attack::AttackContext& ctx,
                                    const EvalOptions& options = {}) {
    if (attack_spec.kind == attack::AttackKind::TAP)
        throw EvalError("evaluate_split: TAP cells are produced by evaluate_tap");
    options.detector.validate();
    EvalSetResult out;
    out.cell.label = set.label;
    out.cell.category = set.category;
    out.cell.role = set.role;
    out.cell.attack = attack::attack_name(attack_spec.kind);

    lm::Model storage;
    const lm::Model* model = detail::generation_model(base, artifact, storage);
    bool use_acc = data::scored_with_accuracy(set.category);

    for (const data::PromptInstance& pi : set.instances) {
        InstanceRecord rec;
        rec.task_id = pi.task_id;
        try {
            data::Conversation conv = attack::apply_attack(attack_spec, pi, plan, ctx);
            rec.prompt_text = data::render_text(conv);
            std::vector<int> tokens = data::render_prompt_tokens(conv);
            lm::GenerationResult gen = lm::generate(*model, tokens, options.max_new_tokens);
            rec.completion = data::strip_role_markers(gen.text);
            std::string judged_text = rec.completion;
            if (attack_spec.kind == attack::AttackKind::B64) {
                attack::B64Decoded decoded = attack::decode_b64_response(rec.completion);
                judged_text = decoded.text;  // raw completion when invalid
            }
            std::optional<bool> probe;
            if (artifact.method == scoping::Method::PROBE)
                probe = detail::probe_decision(artifact, base, tokens);
            rec.verdict = detect::detect(artifact.method, judged_text, probe, options.detector);
            if (set.role == data::Role::accept)
                rec.score = task_score(use_acc, judged_text, pi.refs);
            out.cell.n += 1;
            out.cell.n_rejected += rec.verdict.reject ? 1 : 0;
            out.cell.score_sum += rec.score;
        } catch (const LengthError& e) {
            rec.failed = true;
            rec.error = e.what();
            out.cell.n_failed += 1;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

// TAP cell: n seed prompts per set; a prompt counts as rejected when the
// search fails to make the model answer within budget.
inline EvalSetResult evaluate_tap(const lm::Model& base, const scoping::ScopedArtifact& artifact,
                                  const data::EvalSet& set, const data::ScopePlan& plan,
                                  const attack::TapConfig& tap_config, int n_prompts,
                                  const EvalOptions& options = {}) {
    EvalSetResult out;
    out.cell.label = set.label;
    out.cell.category = set.category;
    out.cell.role = set.role;
    out.cell.attack = attack::attack_name(attack::AttackKind::TAP);

    lm::Model storage;
    const lm::Model* model = detail::generation_model(base, artifact, storage);
    attack::ModelEndpoint target(*model, options.max_new_tokens);
    attack::JudgeFn judge = [&](const data::Conversation& conv, const std::string& completion) {
        std::optional<bool> probe;
        if (artifact.method == scoping::Method::PROBE)
            probe = detail::probe_decision(artifact, base, data::render_prompt_tokens(conv));
        return detect::detect(artifact.method, completion, probe, options.detector);
    };
    bool use_acc = data::scored_with_accuracy(set.category);

    int n = std::min<int>(n_prompts, static_cast<int>(set.instances.size()));
    for (int i = 0; i < n; ++i) {
        const data::PromptInstance& pi = set.instances[static_cast<std::size_t>(i)];
        attack::HeuristicAttacker attacker(pi.category, mix_seed(tap_config.seed, pi.instruction));
        attack::TapResult r = attack::run_tap(target, attacker, judge, pi, plan, tap_config);
        InstanceRecord rec;
        rec.task_id = pi.task_id;
        rec.prompt_text = r.best_prompt;
        for (const attack::TapNode& node : r.tree)
            if (node.adversarial_prompt == r.best_prompt && node.queried) rec.completion = node.target_response;
        rec.verdict.reject = !r.success;
        rec.verdict.reason = r.success ? detect::Reason::none : detect::Reason::string_match;
        rec.verdict.evidence = r.success ? "" : "tap exhausted";
        if (set.role == data::Role::accept) rec.score = task_score(use_acc, rec.completion, pi.refs);
        out.cell.n += 1;
        out.cell.n_rejected += r.success ? 0 : 1;
        out.cell.score_sum += rec.score;
        out.records.push_back(std::move(rec));
    }
    return out;
}

// ---- aggregation ----

struct Aggregates {
    double accept = 0.0;      // mean rejection rate over accept sets (want low)
    double id_reject = 0.0;   // mean over trained reject sets (want high)
    double ood_reject = 0.0;  // mean over everything else (want high)
    double accept_score = 0.0;
    int n_accept_sets = 0, n_id_sets = 0, n_ood_sets = 0;
};

// Means of rejection rates grouped by set role; accept_score averages the
// task metric over all accept prompts (a refusal on an accept prompt drags
// the score down). Raises when an evaluation category has no cell.
inline Aggregates aggregate(const std::vector<EvalCell>& cells, const data::ScopePlan& plan) {
    std::map<data::Category, int> covered;
    for (const EvalCell& c : cells) covered[c.category]++;
    std::string gaps;
    for (data::Category c : data::kAllCategories)
        if (!covered.count(c)) gaps += std::string(gaps.empty() ? "" : ", ") + data::category_token(c);
    if (!gaps.empty()) throw EvalError("aggregate: missing evaluation cells for: " + gaps);

    Aggregates agg;
    double score_n = 0.0;
    for (const EvalCell& c : cells) {
        switch (c.role) {
            case data::Role::accept:
                agg.accept += c.rejection_rate();
                agg.n_accept_sets += 1;
                agg.accept_score += c.accept_score();
                score_n += 1.0;
                break;
            case data::Role::id_reject:
                agg.id_reject += c.rejection_rate();
                agg.n_id_sets += 1;
                break;
            case data::Role::ood_reject:
                agg.ood_reject += c.rejection_rate();
                agg.n_ood_sets += 1;
                break;
        }
    }
    (void)plan;
    if (agg.n_accept_sets) {
        agg.accept /= agg.n_accept_sets;
        agg.accept_score /= score_n;
    }
    if (agg.n_id_sets) agg.id_reject /= agg.n_id_sets;
    if (agg.n_ood_sets) agg.ood_reject /= agg.n_ood_sets;
    return agg;
}

// ---- persistence ----

inline nlohmann::json cell_to_json(const EvalCell& c) {
    return {{"label", c.label},
            {"category", data::category_token(c.category)},
            {"role", data::role_name(c.role)},
            {"attack", c.attack},
            {"n", c.n},
            {"n_rejected", c.n_rejected},
            {"n_failed", c.n_failed},
            {"score_sum", c.score_sum}};
}

inline EvalCell cell_from_json(const nlohmann::json& j) {
    EvalCell c;
    c.label = j.at("label").get<std::string>();
    c.category = data::parse_category(j.at("category").get<std::string>());
    c.role = data::parse_role(j.at("role").get<std::string>());
    c.attack = j.at("attack").get<std::string>();
    c.n = j.at("n").get<int>();
    c.n_rejected = j.at("n_rejected").get<int>();
    c.n_failed = j.at("n_failed").get<int>();
    c.score_sum = j.at("score_sum").get<double>();
    return c;
}

}  // namespace scopekit::eval
