#pragma once

#include <random>
#include <string>
#include <vector>

#include "lm/model.hpp"
#include "lm/vocab.hpp"
#include "retrieval/corpus.hpp"

namespace testing_support {

inline const std::vector<std::string>& tiny_texts() {
    static const std::vector<std::string> texts = {
        "the color of apple is red.",      "the color of sky is blue.",
        "the size of ant is small.",       "the size of whale is large.",
        "what is the color of apple?",     "the taste of lemon is sour, and the taste of honey is sweet.",
    };
    return texts;
}

inline ttarag::Vocab tiny_vocab() { return ttarag::Vocab::build(tiny_texts()); }

inline ttarag::LmConfig tiny_config(std::size_t vocab_size, std::uint64_t seed = 11) {
    ttarag::LmConfig c;
    c.vocab_size = vocab_size;
    c.embed_dim = 8;
    c.layers = 1;
    c.heads = 2;
    c.context = 48;
    c.seed = seed;
    return c;
}

inline std::vector<ttarag::Document> tiny_corpus() {
    std::vector<ttarag::Document> docs;
    const auto& t = tiny_texts();
    for (std::size_t i = 0; i < t.size(); ++i) docs.push_back({"d" + std::to_string(i), "toy", t[i]});
    return docs;
}

/// Random lowercase word of 1..7 letters.
inline std::string random_word(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(1, 7), letter(0, 25);
    std::string w;
    for (int i = len(rng); i > 0; --i) w.push_back(static_cast<char>('a' + letter(rng)));
    return w;
}

}  // namespace testing_support
