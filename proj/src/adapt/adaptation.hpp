#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adapt/optimizer.hpp"
#include "context/splitter.hpp"
#include "lm/model.hpp"
#include "lm/vocab.hpp"

namespace ttarag {

/// Test-time adaptation hyperparameters. `clip_norm` may be +infinity to
/// disable clipping.
struct AdaptationConfig {
    double learning_rate = 1e-5;
    std::size_t accumulation_steps = 2;
    std::size_t pair_budget = 3;
    double clip_norm = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    OptimizerKind optimizer = OptimizerKind::adamw;

    void validate() const;
    OptimizerSettings optimizer_settings() const;
};

class AdaptationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Token layout of one adaptation example: query, separator, prefix, suffix.
struct EncodedPair {
    std::vector<TokenId> inputs;   // all tokens but the last
    std::vector<TokenId> targets;  // inputs shifted left by one
    std::vector<bool> mask;        // true where the target is a suffix token
    std::size_t suffix_tokens = 0;
};

/// Throws AdaptationError when the suffix encodes to nothing and
/// ContextLengthError when the concatenation exceeds `context`.
EncodedPair encode_pair(const Vocab& vocab, std::string_view query, const PrefixSuffixPair& pair,
                        std::size_t context);

/// -log P(suffix | prefix, query) averaged over suffix tokens.
Tensor pair_loss(const TransformerLm& model, const Vocab& vocab, std::string_view query,
                 const PrefixSuffixPair& pair);

/// Sum of pair losses; throws std::invalid_argument on an empty list.
Tensor adaptation_loss(const TransformerLm& model, const Vocab& vocab, std::string_view query,
                       std::span<const PrefixSuffixPair> pairs);

struct AdaptationTrace {
    std::vector<double> pair_losses;     // pre-update loss of each pair, in order
    std::vector<double> grad_norms;      // accumulated mean gradient norm before clipping
    std::vector<double> clipped_norms;   // norm handed to the optimizer
    std::vector<double> clip_factors;
    double seconds = 0.0;
    bool failed = false;
    std::string failure;

    std::size_t updates() const { return clip_factors.size(); }
};

/// One pass over `pairs`: backward per pair, and every `accumulation_steps`
/// pairs (plus a final partial group) one clipped optimizer update on the
/// mean gradient. Optimizer state is fresh per call.
///
/// The model must hold `pristine` (checked via the generation counter). On
/// a non-finite loss or gradient the model is restored to `pristine` and the
/// returned trace is marked failed.
AdaptationTrace adapt(TransformerLm& model, const ParameterSnapshot& pristine, const Vocab& vocab,
                      std::string_view query, std::span<const PrefixSuffixPair> pairs,
                      const AdaptationConfig& config);

}  // namespace ttarag
