#include "context/splitter.hpp"

#include <cctype>
#include <string_view>

#include "lm/vocab.hpp"

namespace ttarag {

namespace {

std::string join(std::span<const std::string> words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

}  // namespace

const char* to_string(SplitKind kind) {
    switch (kind) {
        case SplitKind::punctuation: return "punctuation";
        case SplitKind::midpoint: return "midpoint";
        case SplitKind::whole_passage: return "whole_passage";
    }
    return "unknown";
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

std::size_t passage_token_count(std::string_view text) { return Vocab::pretokenize(text).size(); }

bool is_boundary_mark(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

std::vector<Document> filter_passages(std::span<const Document> passages, std::size_t min_tokens) {
    std::vector<Document> kept;
    for (const auto& p : passages) {
        if (passage_token_count(p.text) >= min_tokens) kept.push_back(p);
    }
    return kept;
}

std::optional<PrefixSuffixPair> split_passage(std::string_view text, std::string_view source_id) {
    const auto words = split_words(text);
    const std::size_t n = words.size();
    if (n < 2 * kMinSideWords) return std::nullopt;

    std::size_t cut = n / 2;
    SplitKind kind = SplitKind::midpoint;
    // Word i closes a candidate boundary when its last character is a mark;
    // the first one leaving enough words on both sides wins.
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_boundary_mark(words[i].back())) continue;
        const std::size_t left = i + 1;
        if (left >= kMinSideWords && n - left >= kMinSideWords) {
            cut = left;
            kind = SplitKind::punctuation;
            break;
        }
    }
    const std::span<const std::string> all(words);
    return PrefixSuffixPair{join(all.first(cut)), join(all.subspan(cut)), std::string(source_id), kind};
}

std::vector<PrefixSuffixPair> build_adaptation_set(std::span<const Document> ranked, std::size_t budget,
                                                   std::size_t min_tokens) {
    std::vector<PrefixSuffixPair> pairs;
    if (budget == 0) return pairs;
    for (const auto& doc : filter_passages(ranked, min_tokens)) {
        if (auto pair = split_passage(doc.text, doc.id)) {
            pairs.push_back(std::move(*pair));
            if (pairs.size() == budget) break;
        }
    }
    return pairs;
}

std::vector<PrefixSuffixPair> build_whole_passage_set(std::span<const Document> ranked, std::size_t budget,
                                                      std::size_t min_tokens) {
    std::vector<PrefixSuffixPair> out;
    if (budget == 0) return out;
    for (const auto& doc : filter_passages(ranked, min_tokens)) {
        const auto words = split_words(doc.text);
        if (words.empty()) continue;
        out.push_back({"", join(words), doc.id, SplitKind::whole_passage});
        if (out.size() == budget) break;
    }
    return out;
}

}  // namespace ttarag
