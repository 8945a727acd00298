#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tensor/tensor.hpp"

namespace ttarag {

/// Architecture of the reference causal transformer.
struct LmConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 128;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t context = 256;
    std::uint64_t seed = 1234;

    void validate() const;
    bool operator==(const LmConfig&) const = default;
};

class ContextLengthError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Exact copy of every parameter, in the model's canonical order.
struct ParameterSnapshot {
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> values;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;
    std::uint64_t generation = 0;

    /// Bitwise equality of names, shapes and values; generation is ignored.
    bool same_values(const ParameterSnapshot& other) const;
};

/// Pre-LayerNorm decoder-only transformer with learned positions, GELU MLP
/// and an output projection tied to the token embedding (plus an output
/// bias).
///
/// Every in-place parameter mutation must be followed by `mark_modified()`;
/// the generation counter then lets callers assert that the model still
/// holds a particular snapshot.
class TransformerLm {
public:
    explicit TransformerLm(LmConfig config);
    TransformerLm(const TransformerLm&) = delete;
    TransformerLm& operator=(const TransformerLm&) = delete;
    TransformerLm(TransformerLm&&) = default;
    TransformerLm& operator=(TransformerLm&&) = default;

    /// Independent replica with bit-identical parameters and generation.
    TransformerLm clone() const;

    const LmConfig& config() const { return config_; }

    /// Logits of shape (T, V). Records a graph unless a NoGradGuard is active.
    Tensor forward_logits(std::span<const TokenId> ids) const;

    /// Greedy decoding: argmax at each step, ties to the lowest id. Stops at
    /// `eos` (not included in the result), after `max_new_tokens`, or when the
    /// context window is full. Throws ContextLengthError if the prompt alone
    /// does not fit.
    std::vector<TokenId> greedy_generate(std::span<const TokenId> prompt, std::size_t max_new_tokens,
                                         TokenId eos) const;

    ParameterSnapshot snapshot() const;
    /// Throws std::invalid_argument when names or shapes differ.
    void restore(const ParameterSnapshot& snap);

    std::span<Tensor> parameters() { return params_; }
    std::span<const Tensor> parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    Tensor& parameter(std::string_view name);
    std::size_t parameter_count() const;

    std::uint64_t generation() const { return generation_; }
    void mark_modified();
    void zero_grad();

private:
    Tensor hidden_states(std::span<const TokenId> ids) const;
    Tensor output_logits(const Tensor& hidden) const;
    Tensor& add_param(std::string name, Shape shape, std::vector<double> values);

    struct Block {
        std::size_t ln1_gain, ln1_bias, qkv_w, qkv_b, proj_w, proj_b;
        std::size_t ln2_gain, ln2_bias, fc_w, fc_b, out_w, out_b;
    };

    LmConfig config_;
    std::vector<Tensor> params_;
    std::vector<std::string> names_;
    std::vector<Block> blocks_;
    std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_gain_ = 0, lnf_bias_ = 0, head_b_ = 0;
    std::uint64_t generation_ = 0;
};

}  // namespace ttarag
