#include "lm/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace ttarag {

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> names{"<pad>", "<unk>", "<eos>", "<sep>"};
    return names;
}

}  // namespace

bool Vocab::is_punctuation(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> Vocab::pretokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_punctuation(c)) {
            flush();
            out.emplace_back(1, c);
        } else {
            word.push_back(c);
        }
    }
    flush();
    return out;
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t min_freq) {
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts) {
        for (auto& tok : pretokenize(text)) ++counts[std::move(tok)];
    }
    if (counts.empty()) throw std::invalid_argument("build_vocab: corpus contains no tokens");
    std::vector<std::string> tokens = reserved_tokens();
    for (const auto& [tok, n] : counts) {
        if (n >= min_freq) tokens.push_back(tok);
    }
    return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kReserved || !std::equal(reserved_tokens().begin(), reserved_tokens().end(), tokens.begin())) {
        throw std::invalid_argument("vocab: token list does not start with the reserved tokens");
    }
    Vocab v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
            throw std::invalid_argument("vocab: duplicate token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& tok : pretokenize(text)) {
        auto it = index_.find(tok);
        ids.push_back(it == index_.end() || it->second < kReserved ? kUnk : it->second);
    }
    return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        const std::string& tok = id < tokens_.size() ? tokens_[id] : tokens_[kUnk];
        const bool attach = tok.size() == 1 && is_punctuation(tok[0]);
        if (!out.empty() && !attach) out.push_back(' ');
        out += tok;
    }
    return out;
}

}  // namespace ttarag
