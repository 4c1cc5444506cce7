#pragma once

// The three trainable objectives and the rerouting schedule.
//
// SFT: token cross-entropy over completion positions only.
// DPO: -log sigmoid(beta * [(pol - ref) margin of chosen over rejected]),
//      log-probs summed over completion tokens, reference frozen.
// CB:  L_a keeps accept representations in place (mean squared L2 distance),
//      L_r pushes reject representations toward orthogonality
//      (mean relu cosine); combined as alpha(t) * L_a + beta(t) * L_r.

#include <set>
#include <vector>

#include "scopekit/autodiff.hpp"
#include "scopekit/data/plan.hpp"
#include "scopekit/data/prompt.hpp"
#include "scopekit/lm/graph.hpp"
#include "scopekit/lm/model.hpp"

namespace scopekit::scoping {

using ad::Mat;

// ---- teacher-forcing views ----

// Next-token targets and completion mask for one rendered training sequence.
// Position i predicts token i+1; the mask selects positions whose target
// falls inside the completion.
struct SftView {
    std::vector<int> inputs;   // tokens[0 .. n-2]
    std::vector<int> targets;  // tokens[1 .. n-1]
    std::vector<int> mask;     // 1 where target index >= completion_begin
    int completion_tokens = 0;
};

inline SftView make_sft_view(const data::TrainingTokens& tt) {
    if (tt.completion_begin >= static_cast<int>(tt.tokens.size()))
        throw DomainError("sft view: empty completion");
    SftView v;
    int n = static_cast<int>(tt.tokens.size());
    v.inputs.assign(tt.tokens.begin(), tt.tokens.end() - 1);
    v.targets.assign(tt.tokens.begin() + 1, tt.tokens.end());
    v.mask.resize(static_cast<std::size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i) {
        v.mask[static_cast<std::size_t>(i)] = i + 1 >= tt.completion_begin ? 1 : 0;
        v.completion_tokens += v.mask[static_cast<std::size_t>(i)];
    }
    if (v.completion_tokens == 0) throw DomainError("sft view: empty completion");
    return v;
}

// Builds the single-turn training conversation for an instance: accept-role
// examples learn their gold completion, reject-role examples learn the
// refusal string.
inline data::Conversation training_conversation(const data::PromptInstance& pi) {
    data::Conversation conv;
    conv.system = pi.system_prompt;
    std::string completion = pi.role == data::Role::accept ? pi.gold : std::string(data::kRefusalString);
    if (completion.empty()) throw DataError("training instance has no gold completion");
    conv.turns.push_back({pi.instruction, completion});
    return conv;
}

// ---- SFT ----

inline ad::Var sft_loss_graph(ad::Tape& tape, const lm::Model& model, const lm::GraphForwardOptions& opt,
                              const std::vector<SftView>& batch) {
    if (batch.empty()) throw DomainError("sft_loss: empty batch");
    int total = 0;
    for (const SftView& v : batch) total += v.completion_tokens;
    ad::Var loss;
    for (const SftView& v : batch) {
        lm::GraphForward gf = lm::graph_forward(tape, model, v.inputs, opt);
        ad::Var ce = tape.cross_entropy_masked(gf.logits, v.targets, v.mask);
        ad::Var weighted = tape.s_scale(ce, static_cast<double>(v.completion_tokens) / total);
        loss = loss.valid() ? tape.s_add(loss, weighted) : weighted;
    }
    return loss;
}

// Value-only form (no gradients).
inline double sft_loss(const lm::Model& model, const std::vector<SftView>& batch) {
    ad::Tape tape;
    return sft_loss_graph(tape, model, {model.adapter, nullptr, 0.0, nullptr}, batch).scalar();
}

// ---- DPO ----

struct PreferencePair {
    data::PromptInstance instance;
    std::string chosen;
    std::string rejected;
};

inline std::vector<PreferencePair> build_preference_pairs(const std::vector<data::PromptInstance>& instances) {
    std::vector<PreferencePair> out;
    out.reserve(instances.size());
    for (const data::PromptInstance& pi : instances) {
        if (pi.gold.empty()) throw DataError("preference pair: instance " + pi.task_id + " has no gold");
        PreferencePair p;
        p.instance = pi;
        if (pi.role == data::Role::accept) {
            p.chosen = pi.gold;
            p.rejected = data::kRefusalString;
        } else {
            p.chosen = data::kRefusalString;
            p.rejected = pi.gold;
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline double sequence_logprob_value(const Mat& logits, const std::vector<int>& targets,
                                     const std::vector<int>& mask) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const auto row = logits.row(i);
        double m = row.maxCoeff();
        double lse = m + std::log((row.array() - m).exp().sum());
        total += row(targets[static_cast<std::size_t>(i)]) - lse;
    }
    return total;
}

namespace detail {

inline SftView completion_view(const data::PromptInstance& pi, const std::string& completion) {
    data::Conversation conv;
    conv.system = pi.system_prompt;
    conv.turns.push_back({pi.instruction, completion});
    return make_sft_view(data::render_training_tokens(conv));
}

}  // namespace detail

// One preference pair; policy = base model + adapter (trainable), reference =
// the adapter-free base (never receives gradient).
inline ad::Var dpo_loss_graph(ad::Tape& tape, const lm::Model& base, const lm::GraphForwardOptions& policy_opt,
                              const PreferencePair& pair, double beta) {
    if (pair.chosen.empty() || pair.rejected.empty()) throw DomainError("dpo_loss: empty completion");
    SftView chosen = detail::completion_view(pair.instance, pair.chosen);
    SftView rejected = detail::completion_view(pair.instance, pair.rejected);

    lm::GraphForward pol_c = lm::graph_forward(tape, base, chosen.inputs, policy_opt);
    lm::GraphForward pol_r = lm::graph_forward(tape, base, rejected.inputs, policy_opt);
    ad::Var lp_pol_c = tape.sequence_logprob(pol_c.logits, chosen.targets, chosen.mask);
    ad::Var lp_pol_r = tape.sequence_logprob(pol_r.logits, rejected.targets, rejected.mask);

    // frozen reference: plain inference on the adapter-free base
    double lp_ref_c = sequence_logprob_value(lm::infer_forward(base, chosen.inputs, nullptr), chosen.targets,
                                             chosen.mask);
    double lp_ref_r = sequence_logprob_value(lm::infer_forward(base, rejected.inputs, nullptr),
                                             rejected.targets, rejected.mask);

    Mat ref(1, 1);
    ref(0, 0) = lp_ref_c - lp_ref_r;
    ad::Var margin = tape.s_sub(tape.s_sub(lp_pol_c, lp_pol_r), tape.constant(ref));
    return tape.s_scale(tape.s_log_sigmoid(tape.s_scale(margin, beta)), -1.0);
}

// Value-only form: policy and reference may be any two models sharing the
// tokenizer.
inline double dpo_loss(const lm::Model& policy, const lm::Model& reference, const PreferencePair& pair,
                       double beta) {
    if (pair.chosen.empty() || pair.rejected.empty()) throw DomainError("dpo_loss: empty completion");
    SftView chosen = detail::completion_view(pair.instance, pair.chosen);
    SftView rejected = detail::completion_view(pair.instance, pair.rejected);
    auto lp = [&](const lm::Model& m, const SftView& v) {
        return sequence_logprob_value(lm::infer_forward(m, v.inputs, nullptr), v.targets, v.mask);
    };
    double margin = (lp(policy, chosen) - lp(reference, chosen)) - (lp(policy, rejected) - lp(reference, rejected));
    double z = beta * margin;
    return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));  // -log sigmoid(z)
}

// ---- rerouting schedule ----

// alpha(t) = alpha_max * t / (2T) grows (retain), beta(t) = alpha_max *
// (1 - t/(2T)) decays (reroute); alpha + beta = alpha_max for all t.
inline std::pair<double, double> cb_schedule(int t, int total_steps, double alpha_max) {
    if (total_steps <= 0) throw ConfigError("cb_schedule: total_steps must be positive");
    if (t < 0 || t > total_steps) throw DomainError("cb_schedule: t outside [0, T]");
    double frac = static_cast<double>(t) / (2.0 * total_steps);
    double alpha = std::max(0.0, alpha_max * frac);
    double beta = std::max(0.0, alpha_max * (1.0 - frac));
    return {alpha, beta};
}

// ---- CB losses ----

struct CbLossValues {
    double l_a = 0.0;
    double l_r = 0.0;
    int skipped_rows = 0;  // zero-norm rows excluded from the cosine
};

namespace detail {

inline Mat select_rows(const std::vector<Mat>& blocks, const std::set<int>& layers,
                       const lm::PositionSelector& sel) {
    int n_pos = static_cast<int>(blocks.front().rows());
    std::vector<int> pos = sel.select(n_pos);
    if (layers.empty() || pos.empty()) throw DomainError("cb_losses: empty layer or position selection");
    Mat out(static_cast<Eigen::Index>(layers.size() * pos.size()), blocks.front().cols());
    Eigen::Index r = 0;
    for (int l : layers)
        for (int p : pos) out.row(r++) = blocks[static_cast<std::size_t>(l)].row(p);
    return out;
}

}  // namespace detail

// Trace-level form: both losses from two recorded forward passes.
inline CbLossValues cb_losses_traces(const lm::RepresentationTrace& base_accept,
                                     const lm::RepresentationTrace& adapted_accept,
                                     const lm::RepresentationTrace& base_reject,
                                     const lm::RepresentationTrace& adapted_reject,
                                     const std::set<int>& target_layers,
                                     const lm::PositionSelector& sel = lm::PositionSelector::all()) {
    CbLossValues out;
    Mat ba = detail::select_rows(base_accept.hidden, target_layers, sel);
    Mat aa = detail::select_rows(adapted_accept.hidden, target_layers, sel);
    ad::Tape tape;
    out.l_a = tape.mse_rows_const(tape.constant(aa), ba).scalar();
    Mat br = detail::select_rows(base_reject.hidden, target_layers, sel);
    Mat ar = detail::select_rows(adapted_reject.hidden, target_layers, sel);
    out.l_r = tape.relu_cos_rows_const(tape.constant(ar), br, &out.skipped_rows).scalar();
    return out;
}

// Model-level form over token batches (no gradients).
inline CbLossValues cb_losses(const lm::Model& base, const lm::Model& adapted,
                              const std::vector<std::vector<int>>& accept_batch,
                              const std::vector<std::vector<int>>& reject_batch,
                              const std::set<int>& target_layers,
                              const lm::PositionSelector& sel = lm::PositionSelector::all()) {
    if (accept_batch.empty() || reject_batch.empty()) throw DomainError("cb_losses: empty batch");
    CbLossValues out;
    double a_rows = 0.0, r_rows = 0.0;
    for (const auto& tokens : accept_batch) {
        std::vector<Mat> bb, ab;
        lm::infer_forward(base, tokens, &bb);
        lm::infer_forward(adapted, tokens, &ab);
        Mat b = detail::select_rows(bb, target_layers, sel);
        Mat a = detail::select_rows(ab, target_layers, sel);
        out.l_a += (a - b).squaredNorm();
        a_rows += static_cast<double>(a.rows());
    }
    out.l_a /= a_rows;
    for (const auto& tokens : reject_batch) {
        std::vector<Mat> bb, ab;
        lm::infer_forward(base, tokens, &bb);
        lm::infer_forward(adapted, tokens, &ab);
        Mat b = detail::select_rows(bb, target_layers, sel);
        Mat a = detail::select_rows(ab, target_layers, sel);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double na = a.row(i).norm(), nb = b.row(i).norm();
            if (na < 1e-30 || nb < 1e-30) {
                ++out.skipped_rows;
                continue;
            }
            out.l_r += std::max(0.0, a.row(i).dot(b.row(i)) / (na * nb));
            r_rows += 1.0;
        }
    }
    if (r_rows == 0.0) throw DomainError("cb_losses: no valid reject rows");
    out.l_r /= r_rows;
    return out;
}

struct CbGraphLosses {
    ad::Var l_a;
    ad::Var l_r;
    int skipped_rows = 0;
};

// Gradient form: the adapted side runs through the tape (adapter trainable),
// the base side is frozen inference.
inline CbGraphLosses cb_losses_graph(ad::Tape& tape, const lm::Model& base_frozen, const lm::Model& model,
                                     const lm::GraphForwardOptions& opt,
                                     const std::vector<std::vector<int>>& accept_batch,
                                     const std::vector<std::vector<int>>& reject_batch,
                                     const std::set<int>& target_layers,
                                     const lm::PositionSelector& sel = lm::PositionSelector::all()) {
    if (accept_batch.empty() || reject_batch.empty()) throw DomainError("cb_losses: empty batch");
    CbGraphLosses out;
    // row-count weights so the batch loss is the mean over all selected rows
    double a_rows = 0.0, r_rows = 0.0;
    std::vector<Mat> base_sel_a, base_sel_r;
    for (const auto& tokens : accept_batch) {
        std::vector<Mat> bb;
        lm::infer_forward(base_frozen, tokens, &bb);
        base_sel_a.push_back(detail::select_rows(bb, target_layers, sel));
        a_rows += static_cast<double>(base_sel_a.back().rows());
    }
    for (const auto& tokens : reject_batch) {
        std::vector<Mat> bb;
        lm::infer_forward(base_frozen, tokens, &bb);
        base_sel_r.push_back(detail::select_rows(bb, target_layers, sel));
        r_rows += static_cast<double>(base_sel_r.back().rows());
    }
    for (std::size_t e = 0; e < accept_batch.size(); ++e) {
        lm::GraphForward gf = lm::graph_forward(tape, model, accept_batch[e], opt);
        std::vector<int> pos = sel.select(static_cast<int>(accept_batch[e].size()));
        std::vector<ad::Var> parts;
        for (int l : target_layers) parts.push_back(tape.gather_rows(gf.blocks[static_cast<std::size_t>(l)], pos));
        ad::Var rows = parts.size() == 1 ? parts[0] : tape.vconcat(parts);
        ad::Var mse = tape.mse_rows_const(rows, base_sel_a[e]);
        ad::Var weighted = tape.s_scale(mse, static_cast<double>(base_sel_a[e].rows()) / a_rows);
        out.l_a = out.l_a.valid() ? tape.s_add(out.l_a, weighted) : weighted;
    }
    for (std::size_t e = 0; e < reject_batch.size(); ++e) {
        lm::GraphForward gf = lm::graph_forward(tape, model, reject_batch[e], opt);
        std::vector<int> pos = sel.select(static_cast<int>(reject_batch[e].size()));
        std::vector<ad::Var> parts;
        for (int l : target_layers) parts.push_back(tape.gather_rows(gf.blocks[static_cast<std::size_t>(l)], pos));
        ad::Var rows = parts.size() == 1 ? parts[0] : tape.vconcat(parts);
        int skipped = 0;
        ad::Var cosv = tape.relu_cos_rows_const(rows, base_sel_r[e], &skipped);
        out.skipped_rows += skipped;
        ad::Var weighted = tape.s_scale(cosv, static_cast<double>(base_sel_r[e].rows()) / r_rows);
        out.l_r = out.l_r.valid() ? tape.s_add(out.l_r, weighted) : weighted;
    }
    return out;
}

}  // namespace scopekit::scoping
