#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tensor/tensor.hpp"

namespace ttarag {

/// Word-level vocabulary. Punctuation characters are split into their own
/// tokens; everything else is whitespace-delimited.
///
/// Reserved ids are fixed: 0 padding, 1 unknown, 2 end-of-sequence,
/// 3 query/context separator. Their surface forms contain '<' and '>',
/// which the pretokenizer always splits, so no text can collide with them.
class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kSep = 3;
    static constexpr std::size_t kReserved = 4;

    /// Counts pretokens over `texts`; tokens seen fewer than `min_freq` times
    /// are left out and later encode to kUnk. Throws on an empty corpus.
    static Vocab build(std::span<const std::string> texts, std::size_t min_freq = 1);

    /// Rebuilds a vocabulary from its id-ordered token list (reserved first).
    static Vocab from_tokens(std::vector<std::string> tokens);

    static std::vector<std::string> pretokenize(std::string_view text);
    static bool is_punctuation(char c);

    std::vector<TokenId> encode(std::string_view text) const;
    std::string decode(std::span<const TokenId> ids) const;

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::optional<TokenId> find(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace ttarag
