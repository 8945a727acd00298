#pragma once

#include <filesystem>
#include <stdexcept>

#include "lm/model.hpp"
#include "lm/vocab.hpp"

namespace ttarag {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything needed to rebuild a model: architecture, tokenizer, weights.
struct Checkpoint {
    LmConfig config;
    Vocab vocab;
    ParameterSnapshot snapshot;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (all integers unsigned little-endian, floats IEEE-754
/// binary64 little-endian); see docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds a model from a checkpoint; throws if the weights do not fit the
/// stored configuration.
TransformerLm instantiate(const Checkpoint& ckpt);

}  // namespace ttarag
