#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pipeline/pipeline.hpp"
#include "retrieval/corpus.hpp"

namespace ttarag {

struct BenchmarkOptions {
    std::uint64_t seed = 7;
    std::size_t domains = 5;
    std::size_t facts_per_domain = 300;
    std::size_t queries_per_domain = 200;
    std::size_t attributes_per_domain = 5;
    std::size_t context_passages = 5;  // passages shown in pretraining QA documents
};

struct DomainSpec {
    std::string name;
    bool held_out = false;
    std::vector<std::string> attributes;
    std::vector<std::string> entities;
    std::vector<std::string> values;  // one per fact, fact i = (entities[i / A], attributes[i % A])

    /// Every content word of the domain.
    std::vector<std::string> content_words() const;
};

/// Desk-scale domain-shift benchmark. Each domain has its own invented
/// content vocabulary and templated facts ("the <attr> of <entity> is
/// <value>."); the last domain is held out of pretraining and supplies the
/// evaluation questions ("what is the <attr> of <entity>?").
struct SyntheticBenchmark {
    BenchmarkOptions options;
    std::vector<DomainSpec> domains;
    std::vector<Document> retrieval_corpus;  // fact passages of every domain
    std::vector<Document> pretrain_corpus;   // pretraining domains only: passages + rendered QA documents
    std::vector<QueryRecord> queries;        // held-out domain questions

    const DomainSpec& held_out() const { return domains.back(); }
};

/// Test-time step size for the desk-scale benchmark model; the adaptation
/// default (1e-5) is sized for much larger generators and changes no answer
/// here.
inline constexpr double kBenchmarkAdaptationLr = 1e-2;

SyntheticBenchmark generate_benchmark(const BenchmarkOptions& options);

/// Writes corpus.jsonl, pretrain.jsonl, qa.jsonl and benchmark.json.
void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

std::string fact_passage(const std::string& attribute, const std::string& entity, const std::string& value);
std::string fact_question(const std::string& attribute, const std::string& entity);

}  // namespace ttarag
