#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eval/benchmark.hpp"
#include "eval/judge.hpp"
#include "eval/report.hpp"
#include "lm/model.hpp"
#include "lm/pretrain.hpp"
#include "pipeline/pipeline.hpp"
#include "retrieval/bm25.hpp"

namespace ttarag {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Flat run configuration shared by every workflow command.
struct RunConfig {
    // paths
    std::string out = "out";
    std::string corpus;
    std::string dataset;
    std::string pretrain_corpus;
    std::string checkpoint;
    std::vector<std::string> runs;  // report inputs

    std::uint64_t seed = 7;
    AnswerMode mode = AnswerMode::ttarag;
    bool baseline = true;  // adaptive runs also evaluate naive for the delta columns
    std::size_t parallel = 1;

    LmConfig lm;
    std::size_t vocab_min_freq = 1;
    PretrainOptions pretrain;

    Bm25Params bm25;
    PipelineConfig pipeline;

    JudgeKind judge = JudgeKind::exact;
    std::string judge_url;

    BenchmarkOptions bench;

    SweepAxis axis = SweepAxis::learning_rate;
    std::vector<double> grid;  // empty: the axis default

    /// Throws ConfigError naming the valid keys when `key` is unknown, or
    /// describing the problem when `value` does not parse or is out of range.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;
    /// Applies `key = value` lines; blank lines and '#' comments are skipped.
    void apply_text(std::string_view text, std::string_view origin = "config");
    void load_file(const std::filesystem::path& path);
    /// Every key in file format, in declaration order.
    std::string dump() const;

    std::vector<double> effective_grid() const;
};

struct ConfigKey {
    const char* name;
    const char* help;
};

const std::vector<ConfigKey>& config_keys();
std::string valid_keys_message();

}  // namespace ttarag
