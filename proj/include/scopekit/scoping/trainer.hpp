#pragma once

// Training driver for the scoping methods. One run is a single sequence of
// Adam steps (no weight decay); every stochastic choice flows from the
// config seed, so a run is reproducible bit-for-bit.

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "scopekit/data/splits.hpp"
#include "scopekit/lm/io.hpp"
#include "scopekit/scoping/config.hpp"
#include "scopekit/scoping/losses.hpp"
#include "scopekit/scoping/probe.hpp"

namespace scopekit::scoping {

struct StepLog {
    int step = 0;
    double loss = 0.0;
    double l_a = 0.0, l_r = 0.0;      // CB components
    double alpha = 0.0, beta = 0.0;   // CB schedule weights
};

struct ScopedArtifact {
    Method method = Method::SYS;
    std::optional<lm::LoraAdapter> adapter;
    std::optional<ProbeModel> probe;
    std::optional<lm::LoraAdapter> stage1_adapter;  // SFT_CB: the SFT stage output
    std::vector<StepLog> log;
};

struct TrainHooks {
    std::string checkpoint_dir;  // when set, divergence dumps state here
    std::function<void(const StepLog&)> on_step;
};

namespace detail {

class Adam {
public:
    Adam(double lr, const std::vector<ad::Mat*>& params) : lr_(lr) {
        for (ad::Mat* p : params) {
            m_.push_back(ad::Mat::Zero(p->rows(), p->cols()));
            v_.push_back(ad::Mat::Zero(p->rows(), p->cols()));
        }
    }

    void step(const std::vector<ad::Mat*>& params, const std::vector<ad::Mat*>& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(kBeta1, t_);
        double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * (*grads[i]);
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i]->cwiseProduct(*grads[i]);
            params[i]->array() -=
                lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    double lr_;
    int t_ = 0;
    std::vector<ad::Mat> m_, v_;
};

// Epoch-reshuffled cyclic sampler.
class EpochSampler {
public:
    EpochSampler(std::size_t n, std::uint64_t seed) : seed_(seed), order_(n) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        reshuffle();
    }
    std::size_t next() {
        if (cursor_ == order_.size()) {
            ++epoch_;
            cursor_ = 0;
            reshuffle();
        }
        return order_[cursor_++];
    }

private:
    void reshuffle() {
        Rng rng(mix_seed(seed_, "epoch:" + std::to_string(epoch_)));
        rng.shuffle(order_);
    }
    std::uint64_t seed_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    int epoch_ = 0;
};

inline void collect_lora_params(lm::LoraAdapter& a, lm::LoraGrads& g, const std::vector<std::size_t>& which,
                                std::vector<ad::Mat*>& params, std::vector<ad::Mat*>& grads) {
    for (std::size_t i : which) {
        params.push_back(&a.entries[i].A);
        params.push_back(&a.entries[i].B);
        grads.push_back(&g.dA[i]);
        grads.push_back(&g.dB[i]);
    }
}

inline void dump_checkpoint(const TrainHooks& hooks, const lm::LoraAdapter& adapter, Method method,
                            int step) {
    if (hooks.checkpoint_dir.empty()) return;
    lm::save_adapter(adapter, hooks.checkpoint_dir + "/adapter_diverged.skad",
                     {{"method", method_name(method)}, {"step", step}, {"diverged", true}});
}

inline void abort_if_nonfinite(double loss, const TrainHooks& hooks, const lm::LoraAdapter* adapter,
                               Method method, int step) {
    if (std::isfinite(loss)) return;
    if (adapter) dump_checkpoint(hooks, *adapter, method, step);
    throw TrainingError("training diverged (non-finite loss) at step " + std::to_string(step));
}

// ---- SFT stage ----

inline std::vector<StepLog> run_sft_stage(const TrainConfig& cfg, const std::vector<data::PromptInstance>& train,
                                          const lm::Model& base, lm::LoraAdapter& adapter,
                                          const std::vector<std::size_t>& trainable, const TrainHooks& hooks) {
    std::vector<SftView> views;
    views.reserve(train.size());
    for (const data::PromptInstance& pi : train)
        views.push_back(make_sft_view(data::render_training_tokens(training_conversation(pi))));
    if (views.empty()) throw TrainingError("sft: no training instances");

    lm::Model model = base;
    model.adapter = &adapter;
    lm::LoraGrads grads = lm::LoraGrads::zeros_like(adapter);
    std::vector<ad::Mat*> params, grad_ptrs;
    collect_lora_params(adapter, grads, trainable, params, grad_ptrs);
    Adam opt(cfg.learning_rate, params);
    EpochSampler sampler(views.size(), mix_seed(cfg.seed, "sft-order"));
    Rng dropout_rng(mix_seed(cfg.seed, "sft-dropout"));

    std::vector<StepLog> log;
    for (int step = 0; step < cfg.steps; ++step) {
        grads.set_zero();
        double loss_value = 0.0;
        for (int acc = 0; acc < cfg.grad_accum; ++acc) {
            std::vector<SftView> batch;
            for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(views[sampler.next()]);
            ad::Tape tape;
            lm::GraphForwardOptions opt_fwd{&adapter, &grads, cfg.lora.dropout, &dropout_rng};
            ad::Var loss = sft_loss_graph(tape, model, opt_fwd, batch);
            loss_value += loss.scalar() / cfg.grad_accum;
            tape.backward(loss);
        }
        abort_if_nonfinite(loss_value, hooks, &adapter, cfg.method, step);
        opt.step(params, grad_ptrs);
        StepLog entry{step, loss_value, 0, 0, 0, 0};
        log.push_back(entry);
        if (hooks.on_step) hooks.on_step(entry);
    }
    return log;
}

// ---- CB stage ----

inline std::vector<StepLog> run_cb_stage(const TrainConfig& cfg, const std::vector<data::PromptInstance>& train,
                                         const lm::Model& base, lm::LoraAdapter& adapter,
                                         const std::vector<std::size_t>& trainable, const TrainHooks& hooks) {
    std::vector<std::vector<int>> accept_tokens, reject_tokens;
    for (const data::PromptInstance& pi : train) {
        data::Conversation conv;
        conv.system = pi.system_prompt;
        conv.turns.push_back({pi.instruction, pi.gold});  // the behavior to retain or to break
        auto tokens = data::render_training_tokens(conv).tokens;
        (pi.role == data::Role::accept ? accept_tokens : reject_tokens).push_back(std::move(tokens));
    }
    if (accept_tokens.empty() || reject_tokens.empty())
        throw TrainingError("cb: needs both accept and reject training instances");

    // the frozen reference is the model at stage start (for plain CB this is
    // exactly the base: a fresh adapter is a no-op)
    lm::Model reference = lm::merge_lora(base, adapter);
    reference.merge_backup.clear();

    lm::Model model = base;
    model.adapter = &adapter;
    lm::LoraGrads grads = lm::LoraGrads::zeros_like(adapter);
    std::vector<ad::Mat*> params, grad_ptrs;
    collect_lora_params(adapter, grads, trainable, params, grad_ptrs);
    Adam opt(cfg.learning_rate, params);
    EpochSampler accept_sampler(accept_tokens.size(), mix_seed(cfg.seed, "cb-accept"));
    EpochSampler reject_sampler(reject_tokens.size(), mix_seed(cfg.seed, "cb-reject"));
    Rng dropout_rng(mix_seed(cfg.seed, "cb-dropout"));
    std::set<int> targets = cfg.resolved_cb_targets(base.cfg.n_layers);
    double alpha_max = *cfg.cb_alpha_max;

    int half = std::max(1, cfg.batch_size / 2);  // accept/reject interleaved 1:1
    std::vector<StepLog> log;
    for (int step = 0; step < cfg.steps; ++step) {
        auto [alpha, beta] = cb_schedule(step, cfg.steps, alpha_max);
        grads.set_zero();
        double loss_value = 0.0, la_value = 0.0, lr_value = 0.0;
        for (int acc = 0; acc < cfg.grad_accum; ++acc) {
            std::vector<std::vector<int>> abatch, rbatch;
            for (int b = 0; b < half; ++b) {
                abatch.push_back(accept_tokens[accept_sampler.next()]);
                rbatch.push_back(reject_tokens[reject_sampler.next()]);
            }
            ad::Tape tape;
            lm::GraphForwardOptions opt_fwd{&adapter, &grads, cfg.lora.dropout, &dropout_rng};
            CbGraphLosses losses = cb_losses_graph(tape, reference, model, opt_fwd, abatch, rbatch, targets);
            ad::Var total = tape.s_add(tape.s_scale(losses.l_a, alpha), tape.s_scale(losses.l_r, beta));
            loss_value += total.scalar() / cfg.grad_accum;
            la_value += losses.l_a.scalar() / cfg.grad_accum;
            lr_value += losses.l_r.scalar() / cfg.grad_accum;
            tape.backward(total);
        }
        abort_if_nonfinite(loss_value, hooks, &adapter, cfg.method, step);
        opt.step(params, grad_ptrs);
        StepLog entry{step, loss_value, la_value, lr_value, alpha, beta};
        log.push_back(entry);
        if (hooks.on_step) hooks.on_step(entry);
    }
    return log;
}

// ---- DPO ----

inline std::vector<StepLog> run_dpo(const TrainConfig& cfg, const std::vector<data::PromptInstance>& train,
                                    const lm::Model& base, lm::LoraAdapter& adapter, const TrainHooks& hooks) {
    std::vector<PreferencePair> pairs = build_preference_pairs(train);
    if (pairs.empty()) throw TrainingError("dpo: no training pairs");
    lm::LoraGrads grads = lm::LoraGrads::zeros_like(adapter);
    std::vector<std::size_t> all(adapter.entries.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<ad::Mat*> params, grad_ptrs;
    collect_lora_params(adapter, grads, all, params, grad_ptrs);
    Adam opt(cfg.learning_rate, params);
    EpochSampler sampler(pairs.size(), mix_seed(cfg.seed, "dpo-order"));
    Rng dropout_rng(mix_seed(cfg.seed, "dpo-dropout"));

    std::vector<StepLog> log;
    for (int step = 0; step < cfg.steps; ++step) {
        grads.set_zero();
        double loss_value = 0.0;
        for (int acc = 0; acc < cfg.grad_accum; ++acc) {
            ad::Tape tape;
            lm::GraphForwardOptions opt_fwd{&adapter, &grads, cfg.lora.dropout, &dropout_rng};
            ad::Var batch_loss;
            for (int b = 0; b < cfg.batch_size; ++b) {
                ad::Var l = dpo_loss_graph(tape, base, opt_fwd, pairs[sampler.next()], *cfg.dpo_beta);
                ad::Var scaled = tape.s_scale(l, 1.0 / cfg.batch_size);
                batch_loss = batch_loss.valid() ? tape.s_add(batch_loss, scaled) : scaled;
            }
            loss_value += batch_loss.scalar() / cfg.grad_accum;
            tape.backward(batch_loss);
        }
        abort_if_nonfinite(loss_value, hooks, &adapter, cfg.method, step);
        opt.step(params, grad_ptrs);
        StepLog entry{step, loss_value, 0, 0, 0, 0};
        log.push_back(entry);
        if (hooks.on_step) hooks.on_step(entry);
    }
    return log;
}

// ---- Probe ----

inline std::vector<StepLog> run_probe(const TrainConfig& cfg, const std::vector<data::PromptInstance>& train,
                                      const lm::Model& base, ProbeModel& probe, const TrainHooks& hooks) {
    // features once, over the frozen base
    std::vector<Eigen::RowVectorXd> accept_feats, reject_feats;
    for (const data::PromptInstance& pi : train) {
        data::Conversation conv;
        conv.system = pi.system_prompt;
        conv.turns.push_back({pi.instruction, std::nullopt});
        auto tokens = data::render_prompt_tokens(conv);
        auto [logits, trace] = lm::forward_with_trace(base, tokens);
        ProbeFeatures f = probe_features(trace);
        (pi.role == data::Role::accept ? accept_feats : reject_feats).push_back(std::move(f.values));
    }
    if (accept_feats.empty() || reject_feats.empty())
        throw TrainingError("probe: needs both accept and reject instances");

    ProbeGrads grads = ProbeGrads::zeros_like(probe);
    std::vector<ad::Mat*> params = {&probe.w1, &probe.b1, &probe.w2, &probe.b2};
    std::vector<ad::Mat*> grad_ptrs = {&grads.dw1, &grads.db1, &grads.dw2, &grads.db2};
    Adam opt(cfg.learning_rate, params);
    EpochSampler accept_sampler(accept_feats.size(), mix_seed(cfg.seed, "probe-accept"));
    EpochSampler reject_sampler(reject_feats.size(), mix_seed(cfg.seed, "probe-reject"));

    int half = std::max(1, cfg.batch_size / 2);  // balanced batches
    std::vector<StepLog> log;
    for (int step = 0; step < cfg.steps; ++step) {
        ad::Mat X(2 * half, probe.input_dim());
        std::vector<double> labels(static_cast<std::size_t>(2 * half));
        for (int b = 0; b < half; ++b) {
            X.row(2 * b) = accept_feats[accept_sampler.next()];
            labels[static_cast<std::size_t>(2 * b)] = 0.0;
            X.row(2 * b + 1) = reject_feats[reject_sampler.next()];
            labels[static_cast<std::size_t>(2 * b + 1)] = 1.0;
        }
        grads = ProbeGrads::zeros_like(probe);
        ad::Tape tape;
        ad::Var loss = probe_loss_graph(tape, probe, &grads, X, labels);
        double loss_value = loss.scalar();
        if (!std::isfinite(loss_value)) throw TrainingError("probe diverged at step " + std::to_string(step));
        tape.backward(loss);
        opt.step(params, grad_ptrs);
        StepLog entry{step, loss_value, 0, 0, 0, 0};
        log.push_back(entry);
        if (hooks.on_step) hooks.on_step(entry);
    }
    return log;
}

inline std::vector<std::size_t> entries_in_layers(const lm::LoraAdapter& a, int layer_end) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        if (a.entries[i].layer < layer_end) out.push_back(i);
    return out;
}

}  // namespace detail

// Trains one scoping method over the plan's training split. SYS is a no-op
// by construction; PROBE trains only the MLP; the rest return a LoRA
// adapter. SFT_CB runs the SFT stage, then continues the same adapter with
// rerouting on the leading-layer entries.
inline ScopedArtifact train(const TrainConfig& config, const data::SplitResult& splits,
                            const lm::Model& base, const TrainHooks& hooks = {}) {
    config.validate(base.cfg.n_layers);
    ScopedArtifact artifact;
    artifact.method = config.method;
    const std::vector<data::PromptInstance>& train_set = splits.train;

    switch (config.method) {
        case Method::SYS:
            return artifact;  // no trainable parameters touched

        case Method::SFT: {
            lm::LoraSpec spec = config.lora;  // all layers
            artifact.adapter = lm::LoraAdapter::init(base.cfg, spec, mix_seed(config.seed, "adapter"));
            std::vector<std::size_t> all(artifact.adapter->entries.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            artifact.log = detail::run_sft_stage(config, train_set, base, *artifact.adapter, all, hooks);
            return artifact;
        }

        case Method::DPO: {
            artifact.adapter = lm::LoraAdapter::init(base.cfg, config.lora, mix_seed(config.seed, "adapter"));
            artifact.log = detail::run_dpo(config, train_set, base, *artifact.adapter, hooks);
            return artifact;
        }

        case Method::PROBE: {
            int input_dim = (base.cfg.n_layers + 1) * base.cfg.d_model;
            artifact.probe = ProbeModel::init(input_dim, mix_seed(config.seed, "probe"));
            artifact.log = detail::run_probe(config, train_set, base, *artifact.probe, hooks);
            return artifact;
        }

        case Method::CB: {
            lm::LoraSpec spec = config.lora;
            if (spec.layer_end == 0) spec.layer_end = lm::depth_fraction_layer(20, base.cfg.n_layers);
            artifact.adapter = lm::LoraAdapter::init(base.cfg, spec, mix_seed(config.seed, "adapter"));
            std::vector<std::size_t> all(artifact.adapter->entries.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            artifact.log = detail::run_cb_stage(config, train_set, base, *artifact.adapter, all, hooks);
            return artifact;
        }

        case Method::SFT_CB: {
            TrainConfig sft_cfg = TrainConfig::defaults(Method::SFT, config.seed);
            sft_cfg.batch_size = config.batch_size;
            sft_cfg.grad_accum = config.grad_accum;
            sft_cfg.lora = config.lora;  // full placement for the SFT stage
            sft_cfg.lora.layer_end = 0;
            artifact.adapter = lm::LoraAdapter::init(base.cfg, sft_cfg.lora, mix_seed(config.seed, "adapter"));
            std::vector<std::size_t> all(artifact.adapter->entries.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            artifact.log = detail::run_sft_stage(sft_cfg, train_set, base, *artifact.adapter, all, hooks);
            artifact.stage1_adapter = artifact.adapter;  // stage boundary snapshot

            TrainConfig cb_cfg = config;
            cb_cfg.method = Method::CB;
            int leading = lm::depth_fraction_layer(20, base.cfg.n_layers);
            std::vector<std::size_t> trainable = detail::entries_in_layers(*artifact.adapter, leading);
            auto cb_log = detail::run_cb_stage(cb_cfg, train_set, base, *artifact.adapter, trainable, hooks);
            for (StepLog& entry : cb_log) entry.step += sft_cfg.steps;
            artifact.log.insert(artifact.log.end(), cb_log.begin(), cb_log.end());
            return artifact;
        }
    }
    throw ConfigError("train: unknown method");
}

// Line-delimited training log (step, losses, schedule weights).
inline void write_training_log(const std::vector<StepLog>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write training log: " + path);
    for (const StepLog& e : log) {
        nlohmann::json j = {{"step", e.step}, {"loss", e.loss}};
        if (e.alpha != 0.0 || e.beta != 0.0) {
            j["l_a"] = e.l_a;
            j["l_r"] = e.l_r;
            j["alpha"] = e.alpha;
            j["beta"] = e.beta;
        }
        os << j.dump() << "\n";
    }
}

// ---- probe persistence (same container format as weights) ----

inline void save_probe(const ProbeModel& p, const std::string& path, const nlohmann::json& extra = {}) {
    nlohmann::json meta = {{"input_dim", p.input_dim()}, {"hidden", ProbeModel::kHidden}};
    if (!extra.is_null()) meta["extra"] = extra;
    lm::detail::write_container(path, "SKPR", meta,
                                {{"w1", &p.w1}, {"b1", &p.b1}, {"w2", &p.w2}, {"b2", &p.b2}});
}

inline ProbeModel load_probe(const std::string& path) {
    auto [meta, tensors] = lm::detail::read_container(path, "SKPR");
    ProbeModel p;
    p.w1 = tensors.at("w1");
    p.b1 = tensors.at("b1");
    p.w2 = tensors.at("w2");
    p.b2 = tensors.at("b2");
    return p;
}

}  // namespace scopekit::scoping
