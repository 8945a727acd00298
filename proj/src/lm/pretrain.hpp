#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lm/model.hpp"

namespace ttarag {

struct PretrainOptions {
    std::size_t steps = 1500;
    double learning_rate = 2e-3;
    std::size_t batch_size = 8;
    std::size_t warmup_steps = 50;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    double heldout_fraction = 0.05;
    std::uint64_t seed = 7;
};

struct PretrainResult {
    ParameterSnapshot snapshot;
    std::vector<double> loss_curve;  // mean training loss per step
    double initial_heldout_loss = 0.0;
    double heldout_loss = 0.0;
    std::size_t train_documents = 0;
    std::size_t heldout_documents = 0;
};

/// Raised when a training loss turns non-finite. `what()` carries the step
/// and the tail of the loss curve.
class TrainingDiverged : public NumericError {
public:
    using NumericError::NumericError;
};

/// Token-weighted mean next-token cross-entropy of `model` over `documents`
/// (each document is scored with an end-of-sequence target appended).
double mean_document_loss(const TransformerLm& model, std::span<const std::vector<TokenId>> documents,
                          TokenId eos);

/// Next-token pretraining with AdamW, linear warmup and cosine decay.
/// Documents are shuffled once with `seed`; the trailing `heldout_fraction`
/// is never trained on and is used for the held-out loss.
PretrainResult pretrain(TransformerLm& model, std::span<const std::vector<TokenId>> documents,
                        const PretrainOptions& options, TokenId eos);

}  // namespace ttarag
