#pragma once

// Synthetic stand-in corpora: one miniature task family per evaluation
// category, generated deterministically from a seed with exact gold outputs.
// Inputs are unique within each task (instances are enumerated through a
// bijective affine walk over the template product space), so train and
// validation splits can never share a prompt string.

#include <algorithm>
#include <cctype>
#include <numeric>
#include <string>
#include <vector>

#include "scopekit/core.hpp"
#include "scopekit/data/task.hpp"

namespace scopekit::data {

namespace toy_detail {

// Bijection i -> (stride * i + offset) mod capacity, with stride coprime to
// capacity, used to scatter enumeration order without repeats.
class AffineEnum {
public:
    AffineEnum(std::uint64_t capacity, Rng& rng) : capacity_(capacity) {
        stride_ = 1 + 2 * (rng.next_u64() % (capacity | 1));
        while (std::gcd(stride_, capacity_) != 1) stride_ += 2;
        offset_ = rng.next_u64() % capacity_;
    }
    std::uint64_t at(std::uint64_t i) const { return (stride_ % capacity_ * (i % capacity_) + offset_) % capacity_; }

private:
    std::uint64_t capacity_, stride_, offset_;
};

using Bank = std::vector<std::string>;

inline std::vector<std::size_t> decode(std::uint64_t idx, const std::vector<std::size_t>& radices) {
    std::vector<std::size_t> out(radices.size());
    for (std::size_t k = 0; k < radices.size(); ++k) {
        out[k] = idx % radices[k];
        idx /= radices[k];
    }
    return out;
}

inline std::uint64_t product(const std::vector<std::size_t>& radices) {
    std::uint64_t p = 1;
    for (std::size_t r : radices) p *= r;
    return p;
}

// Simple synthetic lowercase words from onset x rime syllables.
inline Bank make_words(const Bank& onsets, const Bank& rimes) {
    Bank out;
    for (const std::string& o : onsets)
        for (const std::string& r : rimes) out.push_back(o + r);
    return out;
}

inline const Bank kNames = {"Tom",  "Mia",  "Liam", "Nora", "Ivan", "Ruth",
                            "Omar", "Elsa", "Finn", "Vera", "Hugo", "Lena"};

}  // namespace toy_detail

// ---- per-category generators ----

namespace toy_detail {

inline TaskRecord sa_task(const std::string& task_id, const std::string& dataset, const Bank& subjects,
                          int n, Rng& rng) {
    const Bank intens = {"truly", "really", "simply", "utterly", "quite", "rather"};
    const Bank pos = {"wonderful", "superb", "delightful", "excellent", "charming", "brilliant", "uplifting", "inventive"};
    const Bank neg = {"awful", "dreadful", "boring", "clumsy", "bland", "tedious", "grating", "hollow"};
    std::vector<std::size_t> radices = {subjects.size(), intens.size(), pos.size()};
    std::uint64_t cap_per_label = product(radices);
    n = std::min<int>(n, static_cast<int>(2 * cap_per_label));
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::SA;
    rec.definition = "Decide whether the review is positive or negative. Answer with positive or negative.";
    AffineEnum en(cap_per_label, rng);
    for (int i = 0; i < n; ++i) {
        bool positive = i % 2 == 0;  // exactly balanced
        auto t = decode(en.at(static_cast<std::uint64_t>(i / 2)), radices);
        const Bank& adj = positive ? pos : neg;
        rec.instances.push_back({"Review: " + subjects[t[0]] + " was " + intens[t[1]] + " " + adj[t[2]] + ".",
                                 {positive ? "positive" : "negative"}});
    }
    return rec;
}

inline TaskRecord tld_task(const std::string& task_id, const std::string& dataset, const Bank& nouns,
                           int n, Rng& rng) {
    const Bank adjs = {"fine", "odd", "quick", "slow", "loud", "neat", "plain", "bold"};
    const Bank curses = {"zargfel", "blixnard", "grumwort", "snarkblat"};  // synthetic pseudo-profanity
    const Bank closers = {"well done", "nice try", "keep going", "good effort"};
    const Bank openers = {"Honestly,", "Frankly,"};
    std::vector<std::size_t> radices = {nouns.size(), adjs.size(), curses.size(), openers.size()};
    std::uint64_t cap = product(radices);
    n = std::min<int>(n, static_cast<int>(2 * cap));
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::TLD;
    rec.definition = "Decide whether the comment contains cursing. Answer with toxic or non-toxic.";
    AffineEnum en(cap, rng);
    for (int i = 0; i < n; ++i) {
        bool toxic = i % 2 == 0;
        auto t = decode(en.at(static_cast<std::uint64_t>(i / 2)), radices);
        std::string tail = toxic ? "you " + curses[t[2]] + "!" : closers[t[2]] + "!";
        rec.instances.push_back({"Comment: " + openers[t[3]] + " that " + nouns[t[0]] + " was " + adjs[t[1]] +
                                     ", " + tail,
                                 {toxic ? "toxic" : "non-toxic"}});
    }
    return rec;
}

inline TaskRecord s_task(const std::string& task_id, const std::string& dataset, const Bank& verbs, int n,
                         Rng& rng) {
    const Bank objects = {"bridge", "market", "garden", "museum", "harbor", "library",
                          "stadium", "bakery", "theater", "tower", "mill", "orchard"};
    const Bank fillers = {"Witnesses were surprised.", "Officials declined to comment.",
                          "The weather stayed calm.",  "Neighbors watched closely.",
                          "Reports came in slowly.",   "Few details were given.",
                          "The crowd soon left.",      "More news is expected."};
    std::vector<std::size_t> radices = {kNames.size(), verbs.size(), objects.size(), fillers.size(),
                                        fillers.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::S;
    rec.definition = "Summarize the passage in one short sentence.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        std::string headline = kNames[t[0]] + " " + verbs[t[1]] + " the " + objects[t[2]] + ".";
        rec.instances.push_back({headline + " " + fillers[t[3]] + " " + fillers[t[4]], {headline}});
    }
    return rec;
}

inline TaskRecord tc_task(const std::string& task_id, const std::string& dataset,
                          const std::vector<std::pair<std::string, std::string>>& pairs, int n, Rng& rng) {
    const Bank openers = {"They go together like",  "It always comes as",     "The song was about",
                          "Grandpa spoke of",       "The title mentioned",    "Life felt like",
                          "The recipe called for",  "The riddle paired",      "The poster showed",
                          "The proverb named",      "The story contrasted",   "The sign read",
                          "Everyone expected",      "The lesson compared",    "The game matched",
                          "The banner announced"};
    const Bank closers = {"", " again", " as always", " in the end"};
    std::vector<std::size_t> radices = {pairs.size(), openers.size(), closers.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::TC;
    rec.definition = "Fill in the blank with the missing word. Answer with the word only.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        rec.instances.push_back(
            {openers[t[1]] + " " + pairs[t[0]].first + " ___" + closers[t[2]] + ".", {pairs[t[0]].second}});
    }
    return rec;
}

inline TaskRecord sc_task(const std::string& task_id, const std::string& dataset, const Bank& objects,
                          int n, Rng& rng) {
    const Bank places = {"river", "attic", "school", "forest", "station", "beach", "cellar", "meadow"};
    const Bank moods = {"rainy", "sunny", "windy", "foggy", "chilly", "bright"};
    std::vector<std::size_t> radices = {kNames.size(), objects.size(), places.size(), moods.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::SC;
    rec.definition = "Write a one-sentence ending that says what the character keeps.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        rec.instances.push_back({"On a " + moods[t[3]] + " day " + kNames[t[0]] + " found a " + objects[t[1]] +
                                     " near the " + places[t[2]] + ".",
                                 {kNames[t[0]] + " kept the " + objects[t[1]] + "."}});
    }
    return rec;
}

inline TaskRecord dg_task(const std::string& task_id, const std::string& dataset,
                          const std::vector<std::pair<std::string, std::string>>& exchanges, int n,
                          Rng& rng) {
    const Bank greetings = {"Hello!", "Hi there!", "Good morning!", "Hey!"};
    std::vector<std::size_t> radices = {exchanges.size(), kNames.size(), greetings.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::DG;
    rec.definition = "Continue the dialogue with B's next line.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        rec.instances.push_back({"A (" + kNames[t[1]] + "): " + greetings[t[2]] + " " + exchanges[t[0]].first +
                                     "\nB:",
                                 {exchanges[t[0]].second}});
    }
    return rec;
}

inline TaskRecord pe_string_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    Bank words = make_words({"ta", "ri", "lo", "me", "su", "pa", "ve", "ko", "ni", "du"},
                            {"vo", "la", "ke", "mi", "ra", "po", "se", "tu"});
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::PE;
    rec.definition = "Apply the described string operation and output the result.";
    struct Op {
        std::string name;
        int ks;  // number of k variants (1 when unused)
    };
    std::vector<Op> ops = {{"reverse", 1}, {"uppercase", 1}, {"repeat", 3}, {"first", 3}, {"last", 3}};
    std::vector<AffineEnum> ens;
    std::vector<std::uint64_t> caps;
    for (const Op& op : ops) {
        caps.push_back(words.size() * static_cast<std::uint64_t>(op.ks));
        ens.emplace_back(caps.back(), rng);
    }
    std::uint64_t total = 0;
    for (std::uint64_t c : caps) total += c;
    n = std::min<int>(n, static_cast<int>(total));
    std::vector<std::uint64_t> used(ops.size(), 0);
    int emitted = 0;
    for (std::uint64_t round = 0; emitted < n; ++round) {
        std::size_t oi = static_cast<std::size_t>(round % ops.size());
        if (used[oi] >= caps[oi]) continue;
        auto idx = ens[oi].at(used[oi]++);
        std::size_t wi = static_cast<std::size_t>(idx % words.size());
        int k = static_cast<int>(idx / words.size()) + 2;  // 2..4
        const std::string& w = words[wi];
        std::string input, gold;
        if (ops[oi].name == "reverse") {
            input = "reverse '" + w + "'";
            gold = std::string(w.rbegin(), w.rend());
        } else if (ops[oi].name == "uppercase") {
            input = "uppercase '" + w + "'";
            gold = w;
            for (char& c : gold) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        } else if (ops[oi].name == "repeat") {
            input = "repeat '" + w + "' " + std::to_string(k);
            for (int r = 0; r < k; ++r) gold += w;
        } else if (ops[oi].name == "first") {
            input = "first " + std::to_string(k) + " of '" + w + "'";
            gold = w.substr(0, static_cast<std::size_t>(k));
        } else {
            input = "last " + std::to_string(k) + " of '" + w + "'";
            gold = w.substr(w.size() - static_cast<std::size_t>(k));
        }
        rec.instances.push_back({input, {gold}});
        ++emitted;
    }
    return rec;
}

inline TaskRecord pe_arith_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::PE;
    rec.definition = "Compute the result of the described function on the numbers.";
    const Bank fns = {"sum", "max", "min"};
    std::vector<std::size_t> radices = {fns.size(), 8, 8, 8};  // operands 2..9
    std::uint64_t cap = product(radices);
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        int a = static_cast<int>(t[1]) + 2, b = static_cast<int>(t[2]) + 2, c = static_cast<int>(t[3]) + 2;
        const std::string& fn = fns[t[0]];
        int result = fn == "sum" ? a + b + c : fn == "max" ? std::max({a, b, c}) : std::min({a, b, c});
        rec.instances.push_back({fn + " " + std::to_string(a) + " " + std::to_string(b) + " " +
                                     std::to_string(c),
                                 {std::to_string(result)}});
    }
    return rec;
}

inline TaskRecord pe_count_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    Bank words = make_words({"ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lu", "mo"},
                            {"na", "pe", "ri", "so", "tu", "va", "we", "zo"});
    const Bank letters = {"a", "e", "i", "o", "u", "n", "r", "s"};
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::PE;
    rec.definition = "Compute the result of the described counting function.";
    std::vector<std::size_t> radices = {words.size(), letters.size() + 1};  // last slot = length op
    std::uint64_t cap = product(radices);
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        const std::string& w = words[t[0]];
        if (t[1] == letters.size()) {
            rec.instances.push_back({"length of '" + w + "'", {std::to_string(w.size())}});
        } else {
            const std::string& L = letters[t[1]];
            auto cnt = std::count(w.begin(), w.end(), L[0]);
            rec.instances.push_back({"count '" + L + "' in '" + w + "'", {std::to_string(cnt)}});
        }
    }
    return rec;
}

inline TaskRecord qa_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    const Bank roots = {"Velt",  "Zand",  "Mira",  "Korv",  "Alda",  "Brin",  "Cyra",  "Dorn",
                        "Elva",  "Fenn",  "Garn",  "Hale",  "Isra",  "Jorv",  "Kline", "Lorm",
                        "Marn",  "Nilo",  "Orva",  "Prill", "Quon",  "Rysa",  "Selm",  "Tarn"};
    const Bank country_suffix = {"ia", "ovia"};
    const Bank facts = {"capital", "currency", "river"};
    const Bank templates = {"What is the %F of %C?", "Name the %F of %C.", "Which %F belongs to %C?",
                            "%C has which %F?"};
    std::vector<std::size_t> radices = {roots.size(), country_suffix.size(), facts.size(), templates.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::QA;
    rec.definition = "Answer the question about the fictional atlas.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        std::string country = roots[t[0]] + country_suffix[t[1]];
        std::string gold = facts[t[2]] == "capital" ? roots[(t[0] + 5) % roots.size()] + " City"
                           : facts[t[2]] == "currency" ? roots[(t[0] + 11) % roots.size()] + " crown"
                                                       : roots[(t[0] + 17) % roots.size()] + " River";
        std::string q = templates[t[3]];
        q.replace(q.find("%F"), 2, facts[t[2]]);
        q.replace(q.find("%C"), 2, country);
        rec.instances.push_back({q, {gold}});
    }
    return rec;
}

inline TaskRecord gsm_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    const Bank items = {"apples", "pears", "coins", "books", "shells", "pens", "cards", "stones"};
    std::vector<std::size_t> radices = {kNames.size(), items.size(), 8, 7, 2};  // a in 3..10, b in 1..7
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::GSM8K;
    rec.definition = "Solve the word problem. Answer with the number only.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        int a = static_cast<int>(t[2]) + 3, b = static_cast<int>(t[3]) + 1;
        bool add = t[4] == 0;
        const std::string& name = kNames[t[0]];
        const std::string& item = items[t[1]];
        std::string q, gold;
        if (add) {
            q = name + " has " + std::to_string(a) + " " + item + " and buys " + std::to_string(b) +
                " more. How many " + item + " does " + name + " have now?";
            gold = std::to_string(a + b);
        } else {
            int bb = std::min(b, a - 1);
            q = name + " had " + std::to_string(a) + " " + item + " and gave away " + std::to_string(bb) +
                ". How many " + item + " are left?";
            gold = std::to_string(a - bb);
        }
        rec.instances.push_back({q, {gold}});
    }
    return rec;
}

inline TaskRecord alpaca_task(const std::string& task_id, const std::string& dataset, int n, Rng& rng) {
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"name three primary colors", "red, yellow and blue"},
        {"name three seasons", "spring, summer and autumn"},
        {"name two weekend days", "Saturday and Sunday"},
        {"name three string instruments", "violin, cello and harp"},
        {"name two chess pieces", "knight and rook"},
        {"name three citrus fruits", "lemon, lime and orange"},
        {"name two polar animals", "penguin and walrus"},
        {"name three coniferous trees", "pine, fir and spruce"},
        {"name two card suits", "hearts and spades"},
        {"name three dairy products", "milk, cheese and butter"},
        {"name two ball sports", "soccer and tennis"},
        {"name three breakfast foods", "toast, eggs and porridge"},
        {"name two planets with rings", "Saturn and Uranus"},
        {"name three garden tools", "rake, spade and trowel"},
        {"name two keyboard rows", "home row and top row"},
        {"name three sea creatures", "crab, squid and eel"}};
    const Bank openers = {"Please", "Kindly", "Now", "Quickly"};
    const Bank closers = {".", " for me.", " in a list.", " right away."};
    const Bank politeness = {"", " Thank you."};
    std::vector<std::size_t> radices = {pairs.size(), openers.size(), closers.size(), politeness.size()};
    std::uint64_t cap = product(radices);
    TaskRecord rec;
    rec.task_id = task_id;
    rec.dataset_id = dataset;
    rec.category = Category::ALPACA;
    rec.definition = "Follow the general request.";
    AffineEnum en(cap, rng);
    n = std::min<int>(n, static_cast<int>(cap));
    for (int i = 0; i < n; ++i) {
        auto t = decode(en.at(static_cast<std::uint64_t>(i)), radices);
        rec.instances.push_back(
            {openers[t[1]] + " " + pairs[t[0]].first + closers[t[2]] + politeness[t[3]], {pairs[t[0]].second}});
    }
    return rec;
}

}  // namespace toy_detail

// Deterministic toy corpora: three tasks over two source datasets for each
// trainable category (so fine-grained held-task splits are well-defined),
// plus the three evaluation-only families.
inline std::vector<TaskRecord> synth_toy_tasks(std::uint64_t seed, int per_task = 700) {
    using namespace toy_detail;
    std::vector<TaskRecord> out;
    auto rng_for = [&](const char* tag) { return Rng(mix_seed(seed, std::string("toy:") + tag)); };

    {
        Rng r = rng_for("sa1");
        out.push_back(sa_task("sa_movie_reviews", "toy_reviews_screen",
                              {"The film", "The plot", "The acting", "The soundtrack", "The script",
                               "The pacing", "The ending", "The cast"},
                              per_task, r));
        Rng r2 = rng_for("sa2");
        out.push_back(sa_task("sa_show_reviews", "toy_reviews_screen",
                              {"The series", "The pilot", "The season", "The dialogue", "The premise",
                               "The finale", "The villain", "The humor"},
                              per_task, r2));
        Rng r3 = rng_for("sa3");
        out.push_back(sa_task("sa_meal_reviews", "toy_reviews_dining",
                              {"The meal", "The soup", "The dessert", "The service", "The bread",
                               "The coffee", "The menu", "The seating"},
                              per_task, r3));
    }
    {
        Rng r = rng_for("tld1");
        out.push_back(tld_task("tld_comments", "toy_moderation_board",
                               {"post", "reply", "essay", "joke", "claim", "review", "rant", "note"}, per_task,
                               r));
        Rng r2 = rng_for("tld2");
        out.push_back(tld_task("tld_chat_logs", "toy_moderation_board",
                               {"message", "remark", "answer", "question", "story", "update", "take", "quip"},
                               per_task, r2));
        Rng r3 = rng_for("tld3");
        out.push_back(tld_task("tld_forum_posts", "toy_moderation_forum",
                               {"thread", "comment", "summary", "pitch", "recap", "verdict", "hot take",
                                "headline"},
                               per_task, r3));
    }
    {
        Rng r = rng_for("s1");
        out.push_back(s_task("s_news_wire", "toy_wire_service",
                             {"opened", "closed", "visited", "repaired", "painted", "sold", "bought",
                              "inspected"},
                             per_task, r));
        Rng r2 = rng_for("s2");
        out.push_back(s_task("s_town_bulletin", "toy_wire_service",
                             {"renovated", "toured", "cleaned", "measured", "photographed", "mapped",
                              "decorated", "surveyed"},
                             per_task, r2));
        Rng r3 = rng_for("s3");
        out.push_back(s_task("s_field_notes", "toy_field_journal",
                             {"sketched", "catalogued", "restored", "fenced", "watered", "pruned", "labeled",
                              "weighed"},
                             per_task, r3));
    }
    {
        std::vector<std::pair<std::string, std::string>> pairs_a = {
            {"salt and", "pepper"},   {"thunder and", "lightning"}, {"bread and", "butter"},
            {"day and", "night"},     {"cats and", "dogs"},         {"north and", "south"},
            {"pen and", "paper"},     {"cup and", "saucer"}};
        std::vector<std::pair<std::string, std::string>> pairs_b = {
            {"lock and", "key"},      {"hands and", "knees"},       {"black and", "white"},
            {"up and", "down"},       {"left and", "right"},        {"sun and", "moon"},
            {"king and", "queen"},    {"heads or", "tails"}};
        std::vector<std::pair<std::string, std::string>> pairs_c = {
            {"sweet and", "sour"},    {"thick and", "thin"},        {"near and", "far"},
            {"lost and", "found"},    {"back and", "forth"},        {"safe and", "sound"},
            {"short and", "sweet"},   {"loud and", "clear"}};
        Rng r = rng_for("tc1");
        out.push_back(tc_task("tc_word_pairs", "toy_cloze_pairs", pairs_a, per_task, r));
        Rng r2 = rng_for("tc2");
        out.push_back(tc_task("tc_sayings", "toy_cloze_pairs", pairs_b, per_task, r2));
        Rng r3 = rng_for("tc3");
        out.push_back(tc_task("tc_idioms", "toy_cloze_idioms", pairs_c, per_task, r3));
    }
    {
        Rng r = rng_for("sc1");
        out.push_back(sc_task("sc_lost_items", "toy_story_seeds",
                              {"lantern", "compass", "locket", "marble", "feather", "ribbon", "whistle",
                               "button", "acorn", "pebble", "coin", "key"},
                              per_task, r));
        Rng r2 = rng_for("sc2");
        out.push_back(sc_task("sc_found_gifts", "toy_story_seeds",
                              {"kite", "map", "bell", "brush", "candle", "basket", "scarf", "flute", "badge",
                               "mug", "shell", "crayon"},
                              per_task, r2));
        Rng r3 = rng_for("sc3");
        out.push_back(sc_task("sc_trail_tales", "toy_story_trail",
                              {"rope", "flag", "net", "jar", "spoon", "thimble", "patch", "token", "domino",
                               "stamp", "magnet", "dice"},
                              per_task, r3));
    }
    {
        std::vector<std::pair<std::string, std::string>> ex_a = {
            {"How are you today?", "I am doing well, thank you."},
            {"What time is it?", "It is almost noon."},
            {"Did you sleep well?", "Yes, I slept very well."},
            {"Is it raining outside?", "No, the sky is clear."},
            {"Are you hungry yet?", "Yes, lunch sounds good."},
            {"Where is the library?", "It is across the square."},
            {"Do you like tea?", "Yes, especially green tea."},
            {"Shall we walk together?", "Sure, let us go now."}};
        std::vector<std::pair<std::string, std::string>> ex_b = {
            {"Have you seen my keys?", "They are on the table."},
            {"What did you cook?", "I made vegetable soup."},
            {"When does the train leave?", "It leaves at nine sharp."},
            {"Can you help me later?", "Of course, just call me."},
            {"Was the movie good?", "Yes, it was great fun."},
            {"Is the shop still open?", "It closes in an hour."},
            {"Did the letter arrive?", "Yes, it came this morning."},
            {"Are we still meeting?", "Yes, same place as before."}};
        std::vector<std::pair<std::string, std::string>> ex_c = {
            {"How was the concert?", "The band played wonderfully."},
            {"Do you play chess?", "Yes, but not very well."},
            {"Where did you travel?", "I visited the coast."},
            {"What book is that?", "It is a mystery novel."},
            {"Is your garden growing?", "Yes, the tomatoes are ripe."},
            {"Did practice go well?", "Yes, we learned a new song."},
            {"Can I borrow a pen?", "Certainly, take this one."},
            {"Was the test hard?", "No, it was quite fair."}};
        Rng r = rng_for("dg1");
        out.push_back(dg_task("dg_small_talk", "toy_dialogue_daily", ex_a, per_task, r));
        Rng r2 = rng_for("dg2");
        out.push_back(dg_task("dg_errands", "toy_dialogue_daily", ex_b, per_task, r2));
        Rng r3 = rng_for("dg3");
        out.push_back(dg_task("dg_hobbies", "toy_dialogue_club", ex_c, per_task, r3));
    }
    {
        Rng r = rng_for("pe1");
        out.push_back(pe_string_task("pe_string_ops", "toy_prog_strings", per_task, r));
        Rng r2 = rng_for("pe2");
        out.push_back(pe_arith_task("pe_arithmetic", "toy_prog_numbers", per_task, r2));
        Rng r3 = rng_for("pe3");
        out.push_back(pe_count_task("pe_counting", "toy_prog_strings", per_task, r3));
    }
    {
        Rng r = rng_for("qa1");
        out.push_back(qa_task("qa_atlas", "toy_atlas", per_task, r));
    }
    {
        Rng r = rng_for("gsm1");
        out.push_back(gsm_task("gsm_word_problems", "toy_word_problems", per_task, r));
    }
    {
        Rng r = rng_for("alp1");
        out.push_back(alpaca_task("alpaca_requests", "toy_requests", per_task, r));
    }
    for (TaskRecord& rec : out) rec.validate();
    return out;
}

}  // namespace scopekit::data
