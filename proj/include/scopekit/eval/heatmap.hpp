#pragma once

// Representation drift analysis: average cosine similarity between the base
// model's and a scoped model's hidden states, per layer and per tail
// position, over a set of instances.

#include <string>
#include <vector>

#include "scopekit/data/plan.hpp"
#include "scopekit/data/prompt.hpp"
#include "scopekit/lm/model.hpp"

namespace scopekit::eval {

struct CosineHeatmap {
    ad::Mat grid;  // (n_layers + 1) x tail_positions, entries in [-1, 1]
    int tail_positions = 0;
    std::string dataset_label;
    std::string model_pair;

    int n_layers() const { return static_cast<int>(grid.rows()) - 1; }
};

// Per instance the two models' traces are compared cosine-wise at every
// (layer, position); each instance's matrix is truncated to the set's
// minimum length keeping the tail, then everything is averaged elementwise.
inline CosineHeatmap cosine_heatmap(const lm::Model& base, const lm::Model& scoped,
                                    const std::vector<data::PromptInstance>& instances,
                                    const data::ScopePlan& plan, const std::string& label = "") {
    if (instances.empty()) throw EvalError("cosine_heatmap: no instances");
    std::vector<std::vector<int>> token_seqs;
    int min_len = -1;
    for (const data::PromptInstance& pi : instances) {
        data::Conversation conv;
        conv.system = plan.system_prompt();
        conv.turns.push_back({pi.instruction, std::nullopt});
        token_seqs.push_back(data::render_prompt_tokens(conv));
        int len = static_cast<int>(token_seqs.back().size());
        min_len = min_len < 0 ? len : std::min(min_len, len);
    }

    CosineHeatmap out;
    out.tail_positions = min_len;
    out.dataset_label = label;
    out.model_pair = "base-vs-scoped";
    int rows = base.cfg.n_layers + 1;
    out.grid = ad::Mat::Zero(rows, min_len);

    for (const std::vector<int>& tokens : token_seqs) {
        std::vector<ad::Mat> bb, sb;
        lm::infer_forward(base, tokens, &bb);
        lm::infer_forward(scoped, tokens, &sb);
        int offset = static_cast<int>(tokens.size()) - min_len;  // keep the tail
        for (int l = 0; l < rows; ++l) {
            for (int p = 0; p < min_len; ++p) {
                const auto b = bb[static_cast<std::size_t>(l)].row(offset + p);
                const auto s = sb[static_cast<std::size_t>(l)].row(offset + p);
                double nb = b.norm(), ns = s.norm();
                double cos = (nb < 1e-30 || ns < 1e-30) ? 1.0 : b.dot(s) / (nb * ns);
                out.grid(l, p) += cos / static_cast<double>(token_seqs.size());
            }
        }
    }
    return out;
}

}  // namespace scopekit::eval
