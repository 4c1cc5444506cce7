#pragma once

// Prompt formatting. The chat template is fixed:
//
//   <|system|>\n{system}\n<|user|>\n{instruction}\n<|assistant|>\n{completion}
//
// rendered as plain text over the byte tokenizer; a BOS token opens every
// sequence and each completed assistant turn is closed by the EOS token.
// Additional turns repeat the user/assistant segments.

#include <optional>
#include <string>
#include <vector>

#include "scopekit/core.hpp"
#include "scopekit/lm/tokenizer.hpp"

namespace scopekit::data {

inline constexpr const char* kRefusalString = "I cannot answer that.";

inline constexpr const char* kSystemMarker = "<|system|>";
inline constexpr const char* kUserMarker = "<|user|>";
inline constexpr const char* kAssistantMarker = "<|assistant|>";

// "X", "X and Y", "X, Y and Z" in declaration order.
inline std::string join_names(const std::vector<std::string>& names) {
    if (names.empty()) return {};
    if (names.size() == 1) return names[0];
    std::string out;
    for (std::size_t i = 0; i + 1 < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    out += " and " + names.back();
    return out;
}

inline std::string make_system_prompt(const std::vector<std::string>& accept_names) {
    return "You are an assistant who only answers request related to " + join_names(accept_names) +
           ". For all other requests you respond \"" + std::string(kRefusalString) + "\"";
}

struct ChatTurn {
    std::string user;
    std::optional<std::string> assistant;
};

struct Conversation {
    std::string system;
    std::vector<ChatTurn> turns;
};

inline std::string render_text(const Conversation& conv) {
    std::string out = std::string(kSystemMarker) + "\n" + conv.system + "\n";
    for (const ChatTurn& t : conv.turns) {
        out += std::string(kUserMarker) + "\n" + t.user + "\n" + kAssistantMarker + "\n";
        if (t.assistant) out += *t.assistant;
    }
    return out;
}

// Tokens for generation: the last turn must be awaiting an assistant reply.
inline std::vector<int> render_prompt_tokens(const Conversation& conv) {
    using lm::ByteTokenizer;
    std::vector<int> ids = {ByteTokenizer::kBos};
    auto append_text = [&](const std::string& s) {
        for (int t : ByteTokenizer::encode(s)) ids.push_back(t);
    };
    append_text(std::string(kSystemMarker) + "\n" + conv.system + "\n");
    for (const ChatTurn& t : conv.turns) {
        append_text(std::string(kUserMarker) + "\n" + t.user + "\n" + kAssistantMarker + "\n");
        if (t.assistant) {
            append_text(*t.assistant);
            ids.push_back(ByteTokenizer::kEos);
        }
    }
    return ids;
}

struct TrainingTokens {
    std::vector<int> tokens;
    int completion_begin = 0;  // index of the first completion token (first assistant byte of the final turn)
};

// Tokens for teacher forcing: the final turn's assistant text plus its EOS
// are the completion; everything before is context.
inline TrainingTokens render_training_tokens(const Conversation& conv) {
    if (conv.turns.empty() || !conv.turns.back().assistant)
        throw DomainError("render_training_tokens: final turn has no assistant text");
    Conversation context = conv;
    context.turns.back().assistant.reset();
    TrainingTokens out;
    out.tokens = render_prompt_tokens(context);
    out.completion_begin = static_cast<int>(out.tokens.size());
    for (int t : lm::ByteTokenizer::encode(*conv.turns.back().assistant)) out.tokens.push_back(t);
    out.tokens.push_back(lm::ByteTokenizer::kEos);
    return out;
}

// Completions are judged after removing any chat-template role markers the
// model may have emitted.
inline std::string strip_role_markers(std::string text) {
    for (const char* marker : {kSystemMarker, kUserMarker, kAssistantMarker}) {
        std::string m(marker);
        std::size_t pos;
        while ((pos = text.find(m)) != std::string::npos) text.erase(pos, m.size());
    }
    return text;
}

}  // namespace scopekit::data
