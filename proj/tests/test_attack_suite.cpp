#include <catch2/catch_amalgamated.hpp>

#include "scopekit/attack/tap.hpp"
#include "scopekit/attack/transforms.hpp"

using namespace scopekit;
using namespace scopekit::attack;
using data::Category;

namespace {

data::PromptInstance demo_instance(Category cat, const std::string& instruction, const std::string& gold) {
    data::PromptInstance pi;
    pi.task_id = "demo";
    pi.dataset_id = "demo";
    pi.category = cat;
    pi.role = data::Role::ood_reject;
    pi.instruction = instruction;
    pi.input = instruction;
    pi.gold = gold;
    pi.refs = {gold};
    return pi;
}

data::ScopePlan demo_plan() {
    data::ScopePlan p;
    p.accept = {Category::SA};
    p.reject = {Category::S};
    p.n_accept = 4;
    p.n_reject = 4;
    return p;
}

// random UTF-8 string: mixes ASCII, two-, three-, and four-byte code points
std::string random_utf8(Rng& rng, int max_cp = 40) {
    std::string out;
    int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_cp)));
    for (int i = 0; i < n; ++i) {
        std::uint32_t cp = 0;
        switch (rng.next_below(4)) {
            case 0: cp = 0x20 + static_cast<std::uint32_t>(rng.next_below(0x5f)); break;
            case 1: cp = 0xA0 + static_cast<std::uint32_t>(rng.next_below(0x700)); break;
            case 2: cp = 0x800 + static_cast<std::uint32_t>(rng.next_below(0xD000 - 0x800)); break;
            default: cp = 0x10000 + static_cast<std::uint32_t>(rng.next_below(0xFFFF)); break;
        }
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("adv system prompt is injected inside the instruction only") {
    data::ScopePlan plan = demo_plan();
    auto pi = demo_instance(Category::S, "Summarize this article.", "short");
    std::string before = plan.system_prompt();
    std::string transformed = attack_adv_system(pi.instruction, Category::S);
    REQUIRE(transformed.find("only answers request related to Summarization") != std::string::npos);
    REQUIRE(transformed.find(pi.instruction) != std::string::npos);
    // the genuine system prompt is byte-identical before/after
    REQUIRE(plan.system_prompt() == before);

    SECTION("degenerate case: injecting the accept category is permitted") {
        std::string same = attack_adv_system(pi.instruction, Category::SA);
        REQUIRE(same.find("Sentiment Analysis") != std::string::npos);
    }
    SECTION("rendered conversation keeps the genuine system prompt first") {
        data::Conversation conv;
        conv.system = plan.system_prompt();
        conv.turns.push_back({transformed, std::nullopt});
        std::string text = data::render_text(conv);
        REQUIRE(text.find(plan.system_prompt()) < text.find("Summarization"));
    }
}

TEST_CASE("base-64 encode/decode") {
    SECTION("known value") { REQUIRE(b64_encode("Hi") == "SGk="); }
    SECTION("encode then decode is the identity on random UTF-8") {
        Rng rng(123);
        for (int i = 0; i < 500; ++i) {
            std::string s = random_utf8(rng);
            B64Decoded d = b64_decode(b64_encode(s));
            REQUIRE(d.valid);
            REQUIRE(d.text == s);
        }
    }
    SECTION("invalid input falls back flagged") {
        B64Decoded d = decode_b64_response("not base64 at all!");
        REQUIRE(!d.valid);
        REQUIRE(d.text == "not base64 at all!");
        REQUIRE(!b64_decode("AB").valid);     // bad length
        REQUIRE(!b64_decode("A=AA").valid);   // misplaced padding
    }
    SECTION("attack_b64 encodes the instruction") {
        REQUIRE(attack_b64("Hi") == "SGk=");
    }
}

TEST_CASE("few-shot demonstrations") {
    std::vector<data::PromptInstance> pool;
    for (int i = 0; i < 5; ++i)
        pool.push_back(demo_instance(Category::S, "instr " + std::to_string(i), "gold " + std::to_string(i)));
    auto probe = demo_instance(Category::S, "instr 2", "gold 2");  // same as pool[2]

    SECTION("k=1 gives exactly one demonstration block") {
        std::string out = attack_fewshot(probe, 1, pool, 7);
        // one "instruction\ngold\n\n" block, then the probe instruction
        std::size_t blocks = 0, pos = 0;
        while ((pos = out.find("\n\n", pos)) != std::string::npos) {
            ++blocks;
            pos += 2;
        }
        REQUIRE(blocks == 1);
        REQUIRE(out.substr(out.size() - probe.instruction.size()) == probe.instruction);
    }
    SECTION("probe instance never appears among the shots") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::string out = attack_fewshot(probe, 3, pool, seed);
            std::string shots = out.substr(0, out.rfind(probe.instruction));
            REQUIRE(shots.find("gold 2") == std::string::npos);
        }
    }
    SECTION("deterministic under seed") {
        REQUIRE(attack_fewshot(probe, 3, pool, 9) == attack_fewshot(probe, 3, pool, 9));
        REQUIRE(attack_fewshot(probe, 3, pool, 9) != attack_fewshot(probe, 3, pool, 10));
    }
    SECTION("pool smaller than k raises") {
        REQUIRE_THROWS_AS(attack_fewshot(probe, 5, pool, 1), ConfigError);
    }
}

TEST_CASE("two-turn conversations") {
    auto probe = demo_instance(Category::S, "Summarize the minutes.", "summary");
    auto accept_example = demo_instance(Category::SA, "Classify this review.", "positive");

    SECTION("turn 1 carries the accept example and its gold verbatim") {
        auto turns = attack_two_turn(probe, accept_example, false);
        REQUIRE(turns.size() == 2);
        REQUIRE(turns[0].user == accept_example.instruction);
        REQUIRE(turns[0].assistant == accept_example.gold);
        REQUIRE(turns[1].user == probe.instruction);
        REQUIRE(!turns[1].assistant.has_value());
    }
    SECTION("adversarial variant prefixes the second turn") {
        auto turns = attack_two_turn(probe, accept_example, true);
        REQUIRE(turns[1].user.find("only answers request related to Summarization") != std::string::npos);
        REQUIRE(turns[1].user.find(probe.instruction) != std::string::npos);
        REQUIRE(turns[1].user.rfind(probe.instruction) > 0);
    }
}

TEST_CASE("prefill appends the exact sentence") {
    std::string out = attack_prefill("Write a poem.");
    std::string sentence = kPrefillSentence;
    REQUIRE(out.size() >= sentence.size());
    REQUIRE(out.substr(out.size() - sentence.size()) == sentence);

    SECTION("applying twice gives two copies") {
        std::string twice = attack_prefill(out);
        std::size_t first = twice.find(sentence);
        std::size_t second = twice.rfind(sentence);
        REQUIRE(first != second);
    }
    SECTION("empty instruction yields the sentence alone") {
        REQUIRE(attack_prefill("") == sentence);
    }
}

namespace {

// target that accepts iff the prompt contains the magic token
class MagicTarget : public TargetEndpoint {
public:
    int queries = 0;
    std::string complete(const data::Conversation& conv, const lm::Decoding&) override {
        ++queries;
        if (conv.turns.back().user.find("XYZZY") != std::string::npos) return "Here is the answer you wanted.";
        return "I cannot answer that.";
    }
};

// scripted attacker: emits the magic token only at depth 2
class ScriptedAttacker : public AttackerEndpoint {
public:
    std::vector<AttackerProposal> propose(const std::string& goal, const TapNode& parent,
                                          const TapConfig& config) override {
        std::vector<AttackerProposal> out;
        for (int k = 0; k < config.branching_factor; ++k) {
            AttackerProposal p;
            p.prompt = parent.depth >= 1 ? goal + " XYZZY" : goal + " rephrased " + std::to_string(k);
            p.self_score = k;
            out.push_back(p);
        }
        return out;
    }
};

class AlwaysRejectTarget : public TargetEndpoint {
public:
    int queries = 0;
    std::string complete(const data::Conversation&, const lm::Decoding&) override {
        ++queries;
        return "I cannot answer that.";
    }
};

detect::Verdict string_judge(const data::Conversation&, const std::string& completion) {
    return detect::detect(scoping::Method::SFT, completion);
}

}  // namespace

TEST_CASE("TAP finds the magic prompt within budget") {
    MagicTarget target;
    ScriptedAttacker attacker;
    auto seed = demo_instance(Category::S, "Summarize the meeting notes.", "gold");
    TapConfig config;
    TapResult r = run_tap(target, attacker, string_judge, seed, demo_plan(), config);
    REQUIRE(r.success);
    REQUIRE(r.best_prompt.find("XYZZY") != std::string::npos);
    REQUIRE(r.target_queries <= config.query_budget());
    REQUIRE(target.queries == r.target_queries);
    REQUIRE(r.target_queries <= 40);
}

TEST_CASE("TAP terminates with a complete depth-2 tree when the judge always rejects") {
    AlwaysRejectTarget target;
    ScriptedAttacker attacker;
    auto seed = demo_instance(Category::S, "Summarize.", "gold");
    TapConfig config;
    TapResult r = run_tap(target, attacker, string_judge, seed, demo_plan(), config);
    REQUIRE(!r.success);
    REQUIRE(!r.best_prompt.empty());
    int max_depth = 0, at_depth2 = 0;
    for (const TapNode& n : r.tree) {
        max_depth = std::max(max_depth, n.depth);
        if (n.depth == 2) ++at_depth2;
    }
    REQUIRE(max_depth == 2);
    REQUIRE(at_depth2 > 0);
    // root + 2 children + 4 grandchildren for branching 2
    REQUIRE(r.tree.size() == 7);
    REQUIRE(r.target_queries == 7);
    for (const TapNode& n : r.tree) REQUIRE(n.queried);
}

TEST_CASE("TAP respects the query budget and prunes off-topic rewrites") {
    class OffTopicAttacker : public AttackerEndpoint {
    public:
        std::vector<AttackerProposal> propose(const std::string& goal, const TapNode&,
                                              const TapConfig& config) override {
            std::vector<AttackerProposal> out;
            for (int k = 0; k < config.branching_factor; ++k) {
                AttackerProposal p;
                p.prompt = goal + " off topic " + std::to_string(k);
                p.on_topic = false;  // everything self-critiqued away
                out.push_back(p);
            }
            return out;
        }
    };
    AlwaysRejectTarget target;
    OffTopicAttacker attacker;
    auto seed = demo_instance(Category::S, "Summarize.", "gold");
    TapResult r = run_tap(target, attacker, string_judge, seed, demo_plan());
    REQUIRE(!r.success);
    REQUIRE(r.target_queries == 1);  // only the root was ever queried
    for (const TapNode& n : r.tree)
        if (n.depth > 0) REQUIRE(!n.queried);
}

TEST_CASE("TAP retries a failing attacker once, then prunes") {
    class FlakyAttacker : public AttackerEndpoint {
    public:
        int calls = 0;
        std::vector<AttackerProposal> propose(const std::string& goal, const TapNode& parent,
                                              const TapConfig& config) override {
            ++calls;
            throw std::runtime_error("attacker endpoint down");
        }
    };
    AlwaysRejectTarget target;
    FlakyAttacker attacker;
    auto seed = demo_instance(Category::S, "Summarize.", "gold");
    TapResult r = run_tap(target, attacker, string_judge, seed, demo_plan());
    REQUIRE(!r.success);
    REQUIRE(attacker.calls == 2);  // one retry
    bool found_error = false;
    for (const TapNode& n : r.tree) found_error = found_error || !n.error.empty();
    REQUIRE(found_error);
}

TEST_CASE("heuristic attacker is deterministic and stays within branching") {
    HeuristicAttacker attacker(Category::S, 11);
    TapNode parent;
    parent.adversarial_prompt = "Summarize the log.";
    parent.depth = 0;
    TapConfig config;
    auto a = attacker.propose("Summarize the log.", parent, config);
    auto b = attacker.propose("Summarize the log.", parent, config);
    REQUIRE(a.size() == static_cast<std::size_t>(config.branching_factor));
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].prompt == b[i].prompt);
}
