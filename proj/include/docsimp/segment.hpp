#pragma once

#include <string>
#include <vector>

namespace docsimp {

// Splits generated text back into sentences: a '.', '!' or '?' followed by
// whitespace (or end of text) closes a sentence. Trailing text without a
// terminator forms a final sentence; blank input yields no sentences.
inline std::vector<std::string> resegment(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        size_t b = cur.find_first_not_of(" \t\n\r");
        if (b == std::string::npos) {
            cur.clear();
            return;
        }
        size_t e = cur.find_last_not_of(" \t\n\r");
        out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (size_t i = 0; i < text.size(); ++i) {
        cur.push_back(text[i]);
        const char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            const bool at_end = i + 1 == text.size();
            const char next = at_end ? ' ' : text[i + 1];
            if (at_end || next == ' ' || next == '\t' || next == '\n' || next == '\r')
                flush();
        }
    }
    flush();
    return out;
}

}  // namespace docsimp
