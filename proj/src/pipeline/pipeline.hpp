#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adapt/adaptation.hpp"
#include "lm/model.hpp"
#include "lm/vocab.hpp"
#include "retrieval/bm25.hpp"

namespace ttarag {

enum class AnswerMode { naive, ttarag, woseg };

const char* to_string(AnswerMode mode);
/// Accepts "naive", "ttarag", "wo-seg"/"woseg".
AnswerMode parse_answer_mode(std::string_view text);

struct QueryRecord {
    std::string id;
    std::string domain;
    std::string question;
    std::vector<std::string> answers;
    bool operator==(const QueryRecord&) const = default;
};

/// QA dataset JSONL: `{"id", "domain", "question", "answers": [..]}` per line.
/// Throws on malformed lines (with line number), empty questions, empty
/// answer lists and duplicate ids.
std::vector<QueryRecord> parse_dataset(std::string_view jsonl);
std::vector<QueryRecord> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, std::span<const QueryRecord> records);

struct PipelineConfig {
    std::size_t top_k = 5;
    std::size_t max_new_tokens = 8;
    std::size_t min_passage_tokens = kDefaultMinPassageTokens;
    AdaptationConfig adaptation;

    void validate() const;
};

/// Prompt text for a question and rank-ordered passages:
///   "Context:\n<p1>\n...\n<pk>\nQuestion: <q>\nAnswer:"
/// With no passages the context block is omitted.
std::string format_prompt(std::string_view question, std::span<const std::string> passages);

struct AssembledPrompt {
    std::string text;
    std::vector<TokenId> ids;
    std::size_t passages_used = 0;
};

/// Drops the lowest-ranked passages until the encoded prompt fits in
/// `token_budget`. Throws ContextLengthError if the question alone does not.
AssembledPrompt assemble_prompt(const Vocab& vocab, std::string_view question,
                                std::span<const std::string> passages, std::size_t token_budget);

struct StageTimings {
    double retrieve = 0.0;
    double adapt = 0.0;
    double generate = 0.0;
    double total = 0.0;
};

struct Answer {
    std::string query_id;
    std::string text;
    AnswerMode mode = AnswerMode::naive;
    std::vector<std::string> retrieved_ids;
    std::optional<AdaptationTrace> trace;
    bool fallback = false;  // adaptation requested but skipped or failed
    std::string fallback_reason;
    StageTimings timings;
};

/// Per-query RAG flow over one model instance.
///
/// The constructor records the model's current parameters as the pristine
/// state. Adaptive modes adapt, generate with the adapted parameters and
/// then restore the pristine state bit-exactly, so answers never depend on
/// previously processed queries.
class Pipeline {
public:
    Pipeline(const Bm25Index& index, const Vocab& vocab, TransformerLm& model, PipelineConfig config);

    Answer answer(const QueryRecord& query, AnswerMode mode);
    Answer answer_naive(const QueryRecord& query);
    Answer answer_ttarag(const QueryRecord& query);
    Answer answer_woseg(const QueryRecord& query);

    std::vector<Document> retrieve(std::string_view question) const;
    AssembledPrompt prompt_for(std::string_view question, std::span<const Document> passages) const;

    const PipelineConfig& config() const { return config_; }
    const ParameterSnapshot& pristine() const { return pristine_; }
    TransformerLm& model() { return model_; }

private:
    Answer answer_adaptive(const QueryRecord& query, AnswerMode mode);
    std::string generate(const AssembledPrompt& prompt) const;

    const Bm25Index& index_;
    const Vocab& vocab_;
    TransformerLm& model_;
    PipelineConfig config_;
    ParameterSnapshot pristine_;
};

}  // namespace ttarag
