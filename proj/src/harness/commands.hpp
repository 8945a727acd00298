#pragma once

#include <string>

#include "harness/config.hpp"

namespace ttarag {

/// Workflow commands behind the CLI. Each writes its artifacts and the
/// effective configuration (config.txt) under `config.out` and returns a
/// one-line human summary. Failures throw.
std::string cmd_gen_bench(const RunConfig& config);
std::string cmd_pretrain(const RunConfig& config);
std::string cmd_index(const RunConfig& config);
std::string cmd_run(const RunConfig& config);
std::string cmd_sweep(const RunConfig& config);
std::string cmd_ablate(const RunConfig& config);
std::string cmd_report(const RunConfig& config);

}  // namespace ttarag
