#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retrieval/corpus.hpp"

namespace ttarag {

enum class SplitKind { punctuation, midpoint, whole_passage };

const char* to_string(SplitKind kind);

/// One adaptation example. For punctuation/midpoint splits,
/// `prefix + " " + suffix` reproduces the passage's whitespace-normalized
/// word sequence and both sides hold at least three words. `whole_passage`
/// examples (the no-segmentation ablation) have an empty prefix.
struct PrefixSuffixPair {
    std::string prefix;
    std::string suffix;
    std::string source_id;
    SplitKind kind = SplitKind::midpoint;
    bool operator==(const PrefixSuffixPair&) const = default;
};

inline constexpr std::size_t kMinSideWords = 3;
inline constexpr std::size_t kDefaultMinPassageTokens = 6;

/// Whitespace-delimited words.
std::vector<std::string> split_words(std::string_view text);

/// Number of word tokens (words with punctuation split off).
std::size_t passage_token_count(std::string_view text);

/// True for the boundary marks . , ; : ! ?
bool is_boundary_mark(char c);

/// Keeps passages with at least `min_tokens` word tokens, in input order.
std::vector<Document> filter_passages(std::span<const Document> passages, std::size_t min_tokens);

/// Splits after the first word that ends in a boundary mark and leaves at
/// least three words on each side; otherwise at floor(n/2) words. Returns
/// nullopt for passages under six words.
std::optional<PrefixSuffixPair> split_passage(std::string_view text, std::string_view source_id = {});

/// Filter, then split in rank order (one pair per passage) until `budget`
/// pairs are collected.
std::vector<PrefixSuffixPair> build_adaptation_set(std::span<const Document> ranked, std::size_t budget,
                                                   std::size_t min_tokens = kDefaultMinPassageTokens);

/// Ablation variant: filtered whole passages with an empty prefix.
std::vector<PrefixSuffixPair> build_whole_passage_set(std::span<const Document> ranked, std::size_t budget,
                                                      std::size_t min_tokens = kDefaultMinPassageTokens);

}  // namespace ttarag
