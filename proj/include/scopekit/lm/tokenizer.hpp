#pragma once

// Byte-level tokenizer. Token ids 0..255 are raw bytes of the UTF-8 text,
// followed by three specials. Any implementation that follows this mapping
// is bit-compatible.

#include <string>
#include <vector>

#include "scopekit/core.hpp"

namespace scopekit::lm {

struct ByteTokenizer {
    static constexpr int kBos = 256;
    static constexpr int kEos = 257;
    static constexpr int kPad = 258;
    static constexpr int kVocabSize = 259;

    static std::vector<int> encode(const std::string& text) {
        std::vector<int> ids;
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(static_cast<int>(c));
        return ids;
    }

    static std::string decode(const std::vector<int>& ids) {
        std::string out;
        out.reserve(ids.size());
        for (int id : ids) {
            if (id >= 0 && id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
            // specials contribute no text
        }
        return out;
    }
};

}  // namespace scopekit::lm
