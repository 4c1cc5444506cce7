#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

namespace scopekit::eval {

namespace detail {

inline bool is_strippable(unsigned char c) {
    if (std::isspace(c)) return true;
    static const std::string punct = ".,;:!?'\"()[]{}";
    return punct.find(static_cast<char>(c)) != std::string::npos;
}

inline std::string normalize_label(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_strippable(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_strippable(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(std::move(t));
    return out;
}

}  // namespace detail

// Exact match after lowercasing, trimming, and stripping surrounding
// punctuation.
inline int accuracy(const std::string& prediction, const std::string& gold) {
    return detail::normalize_label(prediction) == detail::normalize_label(gold) ? 1 : 0;
}

// LCS F1 over whitespace tokens: P = LCS/|pred|, R = LCS/|gold|,
// F = 2PR/(P+R); zero when either side is empty.
inline double rouge_l(const std::string& prediction, const std::string& gold) {
    std::vector<std::string> p = detail::whitespace_tokens(prediction);
    std::vector<std::string> g = detail::whitespace_tokens(gold);
    if (p.empty() || g.empty()) return 0.0;
    // rolling-array LCS
    std::vector<int> prev(g.size() + 1, 0), cur(g.size() + 1, 0);
    for (std::size_t i = 1; i <= p.size(); ++i) {
        for (std::size_t j = 1; j <= g.size(); ++j) {
            cur[j] = p[i - 1] == g[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[g.size()]);
    if (lcs == 0.0) return 0.0;
    double precision = lcs / static_cast<double>(p.size());
    double recall = lcs / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

// Task metric against multiple references: the best score over references.
inline double task_score(bool use_accuracy, const std::string& prediction,
                         const std::vector<std::string>& refs) {
    double best = 0.0;
    for (const std::string& ref : refs)
        best = std::max(best, use_accuracy ? static_cast<double>(accuracy(prediction, ref))
                                           : rouge_l(prediction, ref));
    return best;
}

}  // namespace scopekit::eval
