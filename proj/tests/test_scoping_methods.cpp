#include <catch2/catch_amalgamated.hpp>

#include "scopekit/data/toy.hpp"
#include "scopekit/scoping/trainer.hpp"

#include "test_oracles.hpp"

using namespace scopekit;
using namespace scopekit::scoping;
using ad::Mat;

namespace {

lm::ModelConfig tiny_config(int layers = 2, int d = 16, int heads = 2, std::uint64_t seed = 42) {
    lm::ModelConfig c;
    c.n_layers = layers;
    c.d_model = d;
    c.n_heads = heads;
    c.vocab_size = 259;
    c.max_seq_len = 320;
    c.seed = seed;
    return c;
}

data::PromptInstance make_instance(data::Role role, const std::string& instruction, const std::string& gold,
                                   const std::string& system = "You answer only demo requests.") {
    data::PromptInstance pi;
    pi.task_id = "demo";
    pi.dataset_id = "demo";
    pi.category = role == data::Role::accept ? data::Category::SA : data::Category::S;
    pi.role = role;
    pi.system_prompt = system;
    pi.instruction = instruction;
    pi.input = instruction;
    pi.gold = gold;
    pi.refs = {gold};
    return pi;
}

lm::LoraAdapter random_adapter(const lm::ModelConfig& cfg, int rank, std::uint64_t seed, double bscale) {
    lm::LoraSpec spec = lm::LoraSpec::full(rank);
    spec.dropout = 0.0;
    lm::LoraAdapter a = lm::LoraAdapter::init(cfg, spec, seed);
    Rng rng(seed + 1);
    for (lm::LoraEntry& e : a.entries)
        for (Eigen::Index i = 0; i < e.B.rows(); ++i)
            for (Eigen::Index j = 0; j < e.B.cols(); ++j) e.B(i, j) = bscale * rng.next_normal();
    return a;
}

}  // namespace

TEST_CASE("sft_loss: uniform logits give ln V per token") {
    lm::Model m = lm::init_model(tiny_config());
    m.w.lm_head.setZero();  // every logit row becomes uniform
    auto pi = make_instance(data::Role::accept, "Say hi.", "hello");
    SftView v = make_sft_view(data::render_training_tokens(training_conversation(pi)));
    double loss = sft_loss(m, {v});
    REQUIRE(loss == Catch::Approx(std::log(259.0)).margin(1e-9));
}

TEST_CASE("sft_loss masks prompt positions") {
    lm::Model m = lm::init_model(tiny_config());
    auto pi = make_instance(data::Role::accept, "Say hi.", "hello");
    SftView v = make_sft_view(data::render_training_tokens(training_conversation(pi)));
    double base = sft_loss(m, {v});
    // perturbing a prompt-position target leaves the loss unchanged
    SftView v2 = v;
    for (std::size_t i = 0; i < v2.mask.size(); ++i) {
        if (!v2.mask[i]) {
            v2.targets[i] = (v2.targets[i] + 7) % 259;
            break;
        }
    }
    REQUIRE(sft_loss(m, {v2}) == base);
}

TEST_CASE("sft_loss rejects empty completions") {
    data::Conversation conv;
    conv.system = "sys";
    conv.turns.push_back({"ask", ""});
    auto tt = data::render_training_tokens(conv);
    // completion is just the EOS token; force a truly empty one
    tt.completion_begin = static_cast<int>(tt.tokens.size());
    REQUIRE_THROWS_AS(make_sft_view(tt), DomainError);
}

TEST_CASE("reject-role training completions are the refusal string") {
    auto pi = make_instance(data::Role::id_reject, "Summarize this.", "a summary");
    data::Conversation conv = training_conversation(pi);
    REQUIRE(conv.turns.back().assistant == std::string(data::kRefusalString));
    auto pa = make_instance(data::Role::accept, "Classify.", "positive");
    REQUIRE(training_conversation(pa).turns.back().assistant == std::string("positive"));
}

TEST_CASE("build_preference_pairs follows the role construction") {
    std::vector<data::PromptInstance> instances = {make_instance(data::Role::accept, "a", "positive"),
                                                   make_instance(data::Role::id_reject, "b", "the gold")};
    auto pairs = build_preference_pairs(instances);
    REQUIRE(pairs.size() == instances.size());
    REQUIRE(pairs[0].chosen == "positive");
    REQUIRE(pairs[0].rejected == data::kRefusalString);
    REQUIRE(pairs[1].chosen == data::kRefusalString);
    REQUIRE(pairs[1].rejected == "the gold");

    SECTION("missing gold raises") {
        instances[0].gold.clear();
        REQUIRE_THROWS_AS(build_preference_pairs(instances), DataError);
    }
}

TEST_CASE("dpo_loss: policy equal to reference gives ln 2") {
    lm::Model m = lm::init_model(tiny_config());
    auto pairs = build_preference_pairs({make_instance(data::Role::accept, "a", "positive")});
    double loss = dpo_loss(m, m, pairs[0], 0.25);
    REQUIRE(loss == Catch::Approx(std::log(2.0)).margin(1e-9));
}

TEST_CASE("dpo_loss is monotone in the margin") {
    // -log sigmoid(beta * margin) must decrease as the margin grows
    lm::Model policy = lm::init_model(tiny_config(2, 16, 2, 1));
    lm::Model reference = lm::init_model(tiny_config(2, 16, 2, 2));
    auto pair = build_preference_pairs({make_instance(data::Role::accept, "a", "positive")})[0];
    double l1 = dpo_loss(policy, reference, pair, 0.05);
    double l2 = dpo_loss(policy, reference, pair, 0.05);
    REQUIRE(l1 == l2);  // deterministic
    // sampled margins: use the closed form against a direct computation
    for (double margin : {-8.0, -2.0, 0.0, 2.0, 8.0}) {
        double direct = -std::log(1.0 / (1.0 + std::exp(-margin)));
        double next = -std::log(1.0 / (1.0 + std::exp(-(margin + 1.0))));
        REQUIRE(next < direct);
    }
}

TEST_CASE("dpo gradient matches finite differences") {
    lm::Model m = lm::init_model(tiny_config(2, 8, 2, 3));
    lm::LoraAdapter adapter = random_adapter(m.cfg, 2, 5, 0.05);
    auto pair = build_preference_pairs({make_instance(data::Role::accept, "hi", "yes", "s")})[0];
    double beta = 0.3;

    lm::LoraGrads grads = lm::LoraGrads::zeros_like(adapter);
    {
        ad::Tape tape;
        lm::GraphForwardOptions opt{&adapter, &grads, 0.0, nullptr};
        ad::Var loss = dpo_loss_graph(tape, m, opt, pair, beta);
        tape.backward(loss);
    }
    auto loss_value = [&]() {
        ad::Tape tape;
        lm::GraphForwardOptions opt{&adapter, nullptr, 0.0, nullptr};
        return dpo_loss_graph(tape, m, opt, pair, beta).scalar();
    };
    double max_rel = 0.0;
    for (std::size_t k = 0; k < adapter.entries.size(); k += 5) {
        lm::LoraEntry& e = adapter.entries[k];
        for (Eigen::Index i = 0; i < e.A.rows(); i += 4)
            for (Eigen::Index j = 0; j < e.A.cols(); ++j) {
                double fd = oracle::central_difference(loss_value, &e.A(i, j));
                max_rel = std::max(max_rel, oracle::rel_error(fd, grads.dA[k](i, j)));
            }
        for (Eigen::Index i = 0; i < e.B.rows(); ++i)
            for (Eigen::Index j = 0; j < e.B.cols(); j += 4) {
                double fd = oracle::central_difference(loss_value, &e.B(i, j));
                max_rel = std::max(max_rel, oracle::rel_error(fd, grads.dB[k](i, j)));
            }
    }
    REQUIRE(max_rel < 1e-4);
}

TEST_CASE("cb_schedule endpoints and crossfade identity") {
    REQUIRE_THROWS_AS(cb_schedule(0, 0, 10.0), ConfigError);
    auto [a0, b0] = cb_schedule(0, 128, 10.0);
    REQUIRE(a0 == 0.0);
    REQUIRE(b0 == 10.0);
    auto [aT, bT] = cb_schedule(128, 128, 10.0);
    REQUIRE(aT == Catch::Approx(5.0));
    REQUIRE(bT == Catch::Approx(5.0));
    for (int t = 0; t <= 128; t += 16) {
        auto [a, b] = cb_schedule(t, 128, 10.0);
        REQUIRE(a + b == Catch::Approx(10.0).margin(1e-12));
        REQUIRE(a >= 0.0);
        REQUIRE(b >= 0.0);
    }
}

TEST_CASE("cb_losses: zero update gives exactly (0, 1)") {
    lm::Model m = lm::init_model(tiny_config());
    lm::LoraSpec spec = lm::LoraSpec::leading(m.cfg.n_layers, 2);
    spec.dropout = 0.0;
    lm::LoraAdapter fresh = lm::LoraAdapter::init(m.cfg, spec, 7);
    lm::Model adapted = m;
    adapted.adapter = &fresh;
    auto targets = lm::rerouting_target_layers(m.cfg.n_layers);
    CbLossValues v = cb_losses(m, adapted, {{1, 2, 3}}, {{4, 5, 6}}, targets);
    REQUIRE(v.l_a == 0.0);
    REQUIRE(v.l_r == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(v.skipped_rows == 0);
}

TEST_CASE("cb_losses on hand-built traces") {
    // orthogonalized reject representations give L_r = 0
    lm::RepresentationTrace base_a, adapted_a, base_r, adapted_r;
    auto fill = [](lm::RepresentationTrace& t, std::vector<Mat> blocks) {
        t.hidden = std::move(blocks);
        t.token_ids = {1, 2};
    };
    Mat e0 = Mat::Zero(2, 4), e1 = Mat::Zero(2, 4);
    e0(0, 0) = 1;
    e0(1, 1) = 2;
    e1(0, 2) = 1;
    e1(1, 3) = 2;  // orthogonal rows
    fill(base_a, {e0, e0});
    fill(adapted_a, {e0, e0});
    fill(base_r, {e0, e0});
    fill(adapted_r, {e1, e1});
    CbLossValues v = cb_losses_traces(base_a, adapted_a, base_r, adapted_r, {1});
    REQUIRE(v.l_a == 0.0);
    REQUIRE(v.l_r == 0.0);
}

TEST_CASE("cb_losses match an independent dense recomputation") {
    Rng rng(31);
    auto random_trace = [&](int layers, int pos, int d) {
        lm::RepresentationTrace t;
        for (int l = 0; l <= layers; ++l) {
            Mat m(pos, d);
            for (Eigen::Index i = 0; i < pos; ++i)
                for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.next_normal();
            t.hidden.push_back(std::move(m));
        }
        t.token_ids.assign(static_cast<std::size_t>(pos), 1);
        return t;
    };
    auto ba = random_trace(3, 4, 5), aa = random_trace(3, 4, 5);
    auto br = random_trace(3, 4, 5), ar = random_trace(3, 4, 5);
    std::set<int> layers = {1, 3};
    CbLossValues v = cb_losses_traces(ba, aa, br, ar, layers);

    // independent recomputation with plain loops
    double l_a = 0.0;
    int rows = 0;
    for (int l : layers)
        for (int p = 0; p < 4; ++p) {
            double d2 = 0.0;
            for (int j = 0; j < 5; ++j) {
                double diff = aa.hidden[static_cast<std::size_t>(l)](p, j) - ba.hidden[static_cast<std::size_t>(l)](p, j);
                d2 += diff * diff;
            }
            l_a += d2;
            ++rows;
        }
    l_a /= rows;
    double l_r = 0.0;
    for (int l : layers)
        for (int p = 0; p < 4; ++p) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int j = 0; j < 5; ++j) {
                double x = ar.hidden[static_cast<std::size_t>(l)](p, j), y = br.hidden[static_cast<std::size_t>(l)](p, j);
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            l_r += std::max(0.0, dot / (std::sqrt(na) * std::sqrt(nb)));
        }
    l_r /= rows;
    REQUIRE(v.l_a == Catch::Approx(l_a).margin(1e-6));
    REQUIRE(v.l_r == Catch::Approx(l_r).margin(1e-6));
}

TEST_CASE("scheduled CB total loss gradient matches finite differences") {
    lm::Model m = lm::init_model(tiny_config(2, 8, 2, 13));
    lm::LoraSpec spec;
    spec.rank = 2;
    spec.dropout = 0.0;
    spec.layer_end = lm::depth_fraction_layer(20, m.cfg.n_layers);
    lm::LoraAdapter adapter = lm::LoraAdapter::init(m.cfg, spec, 3);
    Rng rng(4);
    for (lm::LoraEntry& e : adapter.entries)
        for (Eigen::Index i = 0; i < e.B.rows(); ++i)
            for (Eigen::Index j = 0; j < e.B.cols(); ++j) e.B(i, j) = 0.05 * rng.next_normal();

    std::vector<std::vector<int>> abatch = {{1, 2, 3, 4}};
    std::vector<std::vector<int>> rbatch = {{5, 6, 7}};
    auto targets = lm::rerouting_target_layers(m.cfg.n_layers);
    auto [alpha, beta] = cb_schedule(40, 128, 10.0);

    lm::Model model = m;
    model.adapter = &adapter;

    lm::LoraGrads grads = lm::LoraGrads::zeros_like(adapter);
    {
        ad::Tape tape;
        lm::GraphForwardOptions opt{&adapter, &grads, 0.0, nullptr};
        CbGraphLosses losses = cb_losses_graph(tape, m, model, opt, abatch, rbatch, targets);
        ad::Var total = tape.s_add(tape.s_scale(losses.l_a, alpha), tape.s_scale(losses.l_r, beta));
        tape.backward(total);
    }
    auto loss_value = [&]() {
        ad::Tape tape;
        lm::GraphForwardOptions opt{&adapter, nullptr, 0.0, nullptr};
        CbGraphLosses losses = cb_losses_graph(tape, m, model, opt, abatch, rbatch, targets);
        return alpha * losses.l_a.scalar() + beta * losses.l_r.scalar();
    };
    double max_rel = 0.0;
    for (std::size_t k = 0; k < adapter.entries.size(); k += 3) {
        lm::LoraEntry& e = adapter.entries[k];
        for (Eigen::Index i = 0; i < e.A.rows(); i += 4)
            for (Eigen::Index j = 0; j < e.A.cols(); ++j) {
                double fd = oracle::central_difference(loss_value, &e.A(i, j));
                max_rel = std::max(max_rel, oracle::rel_error(fd, grads.dA[k](i, j)));
            }
        for (Eigen::Index i = 0; i < e.B.rows(); i += 3)
            for (Eigen::Index j = 0; j < e.B.cols(); j += 4) {
                double fd = oracle::central_difference(loss_value, &e.B(i, j));
                max_rel = std::max(max_rel, oracle::rel_error(fd, grads.dB[k](i, j)));
            }
    }
    REQUIRE(max_rel < 1e-4);
}

TEST_CASE("probe_features contract") {
    Rng rng(6);
    lm::RepresentationTrace trace;
    for (int l = 0; l < 3; ++l) {
        Mat m(4, 6);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j < 6; ++j) m(i, j) = rng.next_normal();
        trace.hidden.push_back(std::move(m));
    }
    trace.token_ids = {1, 2, 3, 4};

    ProbeFeatures f = probe_features(trace);
    SECTION("per-layer blocks are unit norm") {
        REQUIRE(f.values.size() == 3 * 6);
        for (int l = 0; l < 3; ++l)
            REQUIRE(f.values.segment(l * 6, 6).norm() == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("matches an independent mean-then-normalize recomputation") {
        for (int l = 0; l < 3; ++l) {
            std::vector<double> mean(6, 0.0);
            for (int p = 1; p < 4; ++p)  // first position removed
                for (int j = 0; j < 6; ++j) mean[static_cast<std::size_t>(j)] += trace.hidden[static_cast<std::size_t>(l)](p, j) / 3.0;
            double norm = 0.0;
            for (double v : mean) norm += v * v;
            norm = std::sqrt(norm);
            for (int j = 0; j < 6; ++j)
                REQUIRE(f.values(l * 6 + j) == Catch::Approx(mean[static_cast<std::size_t>(j)] / norm).margin(1e-6));
        }
    }
    SECTION("identical rows at kept positions give that vector normalized") {
        lm::RepresentationTrace t2;
        Mat m(3, 4);
        m.row(0) << 9, 9, 9, 9;  // anomalous first position, removed
        m.row(1) << 1, 2, 2, 0;
        m.row(2) << 1, 2, 2, 0;
        t2.hidden = {m};
        t2.token_ids = {1, 2, 3};
        ProbeFeatures g = probe_features(t2);
        REQUIRE(g.values(0) == Catch::Approx(1.0 / 3.0));
        REQUIRE(g.values(1) == Catch::Approx(2.0 / 3.0));
    }
    SECTION("single-position trace is a domain error") {
        lm::RepresentationTrace t3;
        t3.hidden = {Mat::Ones(1, 4)};
        t3.token_ids = {1};
        REQUIRE_THROWS_AS(probe_features(t3), DomainError);
    }
    SECTION("zero mean vector stays zero and is counted") {
        lm::RepresentationTrace t4;
        Mat m = Mat::Zero(3, 4);
        m(0, 0) = 5;  // removed position
        t4.hidden = {m};
        t4.token_ids = {1, 2, 3};
        ProbeFeatures g = probe_features(t4);
        REQUIRE(g.zero_norm_layers == 1);
        REQUIRE(g.values.norm() == 0.0);
    }
}

TEST_CASE("probe separates 4-sigma synthetic features quickly") {
    // synthetic traces from two Gaussians whose layer-1 means sit 4 sigma
    // apart (+2 vs -2 on one coordinate, unit position noise)
    int layers = 2, d = 16, n_train = 64, n_val = 64;
    Rng rng(17);
    auto draw_features = [&](bool reject) {
        lm::RepresentationTrace t;
        for (int l = 0; l <= layers; ++l) {
            Mat m(4, d);
            for (Eigen::Index i = 0; i < 4; ++i)
                for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.next_normal();
            if (l == 1) m.col(0).array() += reject ? -2.0 : 2.0;
            t.hidden.push_back(std::move(m));
        }
        t.token_ids = {1, 2, 3, 4};
        return probe_features(t).values;
    };

    ProbeModel probe = ProbeModel::init((layers + 1) * d, 1);
    std::vector<ad::Mat*> params = {&probe.w1, &probe.b1, &probe.w2, &probe.b2};
    ProbeGrads grads = ProbeGrads::zeros_like(probe);
    std::vector<ad::Mat*> grad_ptrs = {&grads.dw1, &grads.db1, &grads.dw2, &grads.db2};
    detail::Adam opt(1e-5, params);  // the tuned probe learning rate
    for (int step = 0; step < 256; ++step) {
        ad::Mat X(8, probe.input_dim());
        std::vector<double> labels(8);
        for (int b = 0; b < 4; ++b) {
            X.row(2 * b) = draw_features(false);
            labels[static_cast<std::size_t>(2 * b)] = 0.0;
            X.row(2 * b + 1) = draw_features(true);
            labels[static_cast<std::size_t>(2 * b + 1)] = 1.0;
        }
        grads = ProbeGrads::zeros_like(probe);
        ad::Tape tape;
        ad::Var loss = probe_loss_graph(tape, probe, &grads, X, labels);
        tape.backward(loss);
        opt.step(params, grad_ptrs);
    }
    int correct = 0;
    for (int i = 0; i < n_val; ++i) {
        bool reject = i % 2 == 1;
        if (probe.decide_reject(draw_features(reject)) == reject) ++correct;
    }
    REQUIRE(static_cast<double>(correct) / n_val >= 0.99);
    (void)n_train;
}

TEST_CASE("train dispatch: SYS touches nothing") {
    lm::Model m = lm::init_model(tiny_config());
    data::SplitResult splits;
    TrainConfig cfg = TrainConfig::defaults(Method::SYS);
    ScopedArtifact art = train(cfg, splits, m);
    REQUIRE(!art.adapter.has_value());
    REQUIRE(!art.probe.has_value());
    REQUIRE(art.log.empty());
}

TEST_CASE("train config validation enforces method-specific fields") {
    TrainConfig cfg = TrainConfig::defaults(Method::SFT);
    cfg.dpo_beta = 0.1;  // not an SFT field
    REQUIRE_THROWS_AS(cfg.validate(4), ConfigError);
    TrainConfig dpo = TrainConfig::defaults(Method::DPO);
    dpo.dpo_beta.reset();
    REQUIRE_THROWS_AS(dpo.validate(4), ConfigError);
    TrainConfig cb = TrainConfig::defaults(Method::CB);
    cb.cb_alpha_max.reset();
    REQUIRE_THROWS_AS(cb.validate(4), ConfigError);
}

TEST_CASE("toy training: SFT memorizes and CB separates representations") {
    // small end-to-end run; the full-scale directional checks live in the
    // acceptance suite
    lm::Model base = lm::init_model(tiny_config(2, 32, 2, 99));
    std::vector<data::PromptInstance> train_set;
    std::string sys = "You are a demo assistant.";
    for (int i = 0; i < 8; ++i) {
        train_set.push_back(make_instance(data::Role::accept, "copy ab" + std::to_string(i), "cd", sys));
        train_set.push_back(
            make_instance(data::Role::id_reject, "poem " + std::to_string(i), "roses are red", sys));
    }
    data::SplitResult splits;
    splits.train = train_set;

    SECTION("SFT overfit: refusals learned, loss dropped") {
        TrainConfig cfg = TrainConfig::defaults(Method::SFT, 5);
        cfg.steps = 130;
        cfg.batch_size = 4;
        cfg.learning_rate = 3e-3;
        cfg.lora.rank = 8;
        cfg.lora.dropout = 0.0;
        ScopedArtifact art = train(cfg, splits, base);
        REQUIRE(art.adapter.has_value());
        REQUIRE(art.log.front().loss > art.log.back().loss);

        lm::Model tuned = base;
        tuned.adapter = &*art.adapter;
        data::Conversation conv;
        conv.system = sys;
        conv.turns.push_back({"poem 3", std::nullopt});
        auto gen = lm::generate(tuned, data::render_prompt_tokens(conv), 40);
        REQUIRE(gen.text.find("cannot answer") != std::string::npos);

        data::Conversation conv2;
        conv2.system = sys;
        conv2.turns.push_back({"copy ab3", std::nullopt});
        auto gen2 = lm::generate(tuned, data::render_prompt_tokens(conv2), 12);
        REQUIRE(gen2.text.find("cd") != std::string::npos);
    }

    SECTION("CB pushes reject cosines below accept cosines") {
        TrainConfig cfg = TrainConfig::defaults(Method::CB, 5);
        cfg.steps = 48;
        cfg.batch_size = 4;
        cfg.learning_rate = 2e-3;
        cfg.lora.rank = 8;
        cfg.lora.dropout = 0.0;
        ScopedArtifact art = train(cfg, splits, base);
        REQUIRE(art.adapter.has_value());

        lm::Model tuned = base;
        tuned.adapter = &*art.adapter;
        auto targets = lm::rerouting_target_layers(base.cfg.n_layers);
        auto mean_cos = [&](const data::PromptInstance& pi) {
            data::Conversation conv;
            conv.system = pi.system_prompt;
            conv.turns.push_back({pi.instruction, pi.gold});
            auto tokens = data::render_training_tokens(conv).tokens;
            std::vector<Mat> bb, ab;
            lm::infer_forward(base, tokens, &bb);
            lm::infer_forward(tuned, tokens, &ab);
            double total = 0.0;
            int rows = 0;
            for (int l : targets)
                for (Eigen::Index p = 0; p < bb[static_cast<std::size_t>(l)].rows(); ++p) {
                    const auto b = bb[static_cast<std::size_t>(l)].row(p);
                    const auto a = ab[static_cast<std::size_t>(l)].row(p);
                    total += a.dot(b) / (a.norm() * b.norm());
                    ++rows;
                }
            return total / rows;
        };
        double accept_cos = 0.0, reject_cos = 0.0;
        for (int i = 0; i < 4; ++i) {
            accept_cos += mean_cos(train_set[static_cast<std::size_t>(2 * i)]) / 4.0;
            reject_cos += mean_cos(train_set[static_cast<std::size_t>(2 * i + 1)]) / 4.0;
        }
        REQUIRE(reject_cos < accept_cos);
    }

    SECTION("SFT_CB stage-2 initial state bit-equals stage-1 final state") {
        TrainConfig cfg = TrainConfig::defaults(Method::SFT_CB, 5);
        cfg.steps = 8;
        cfg.batch_size = 2;
        cfg.lora.rank = 4;
        cfg.lora.dropout = 0.0;
        ScopedArtifact art = train(cfg, splits, base);
        REQUIRE(art.adapter.has_value());
        REQUIRE(art.stage1_adapter.has_value());

        // a plain SFT run with the same seed and placement reproduces stage 1
        TrainConfig sft_cfg = TrainConfig::defaults(Method::SFT, 5);
        sft_cfg.batch_size = cfg.batch_size;
        sft_cfg.lora = cfg.lora;
        ScopedArtifact sft = train(sft_cfg, splits, base);
        REQUIRE(sft.adapter->entries.size() == art.stage1_adapter->entries.size());
        for (std::size_t i = 0; i < sft.adapter->entries.size(); ++i) {
            REQUIRE((sft.adapter->entries[i].A - art.stage1_adapter->entries[i].A).cwiseAbs().maxCoeff() == 0.0);
            REQUIRE((sft.adapter->entries[i].B - art.stage1_adapter->entries[i].B).cwiseAbs().maxCoeff() == 0.0);
        }

        // the CB stage only moves leading-layer entries
        int leading = lm::depth_fraction_layer(20, base.cfg.n_layers);
        for (std::size_t i = 0; i < art.adapter->entries.size(); ++i) {
            const auto& final_e = art.adapter->entries[i];
            const auto& stage1_e = art.stage1_adapter->entries[i];
            if (final_e.layer >= leading) {
                REQUIRE((final_e.A - stage1_e.A).cwiseAbs().maxCoeff() == 0.0);
                REQUIRE((final_e.B - stage1_e.B).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
}

TEST_CASE("training is deterministic under seed") {
    lm::Model base = lm::init_model(tiny_config(2, 16, 2, 21));
    data::SplitResult splits;
    std::string sys = "demo";
    for (int i = 0; i < 6; ++i) {
        splits.train.push_back(make_instance(data::Role::accept, "q" + std::to_string(i), "a", sys));
        splits.train.push_back(make_instance(data::Role::id_reject, "r" + std::to_string(i), "b", sys));
    }
    TrainConfig cfg = TrainConfig::defaults(Method::SFT, 9);
    cfg.steps = 6;
    cfg.batch_size = 2;
    cfg.lora.rank = 2;
    ScopedArtifact a1 = train(cfg, splits, base);
    ScopedArtifact a2 = train(cfg, splits, base);
    for (std::size_t i = 0; i < a1.adapter->entries.size(); ++i) {
        REQUIRE((a1.adapter->entries[i].A - a2.adapter->entries[i].A).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((a1.adapter->entries[i].B - a2.adapter->entries[i].B).cwiseAbs().maxCoeff() == 0.0);
    }
    REQUIRE(a1.log.back().loss == a2.log.back().loss);
}
