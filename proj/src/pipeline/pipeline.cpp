#include "pipeline/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace ttarag {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

const char* to_string(AnswerMode mode) {
    switch (mode) {
        case AnswerMode::naive: return "naive";
        case AnswerMode::ttarag: return "ttarag";
        case AnswerMode::woseg: return "wo-seg";
    }
    return "unknown";
}

AnswerMode parse_answer_mode(std::string_view text) {
    if (text == "naive") return AnswerMode::naive;
    if (text == "ttarag") return AnswerMode::ttarag;
    if (text == "wo-seg" || text == "woseg") return AnswerMode::woseg;
    throw std::invalid_argument("unknown mode '" + std::string(text) + "' (expected naive, ttarag, wo-seg)");
}

std::vector<QueryRecord> parse_dataset(std::string_view jsonl) {
    std::vector<QueryRecord> records;
    std::unordered_set<std::string> ids;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto where = "dataset line " + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument(where + "invalid JSON: " + e.what());
        }
        QueryRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.domain = j.at("domain").get<std::string>();
            r.question = j.at("question").get<std::string>();
            r.answers = j.at("answers").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(where + "expected id, domain, question, answers: " + e.what());
        }
        if (r.question.find_first_not_of(" \t\n") == std::string::npos) throw std::invalid_argument(where + "empty question");
        if (r.answers.empty()) throw std::invalid_argument(where + "no gold answers");
        if (!ids.insert(r.id).second) throw std::invalid_argument(where + "duplicate id '" + r.id + "'");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<QueryRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str());
}

void write_dataset(const std::filesystem::path& path, std::span<const QueryRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["domain"] = r.domain;
        j["question"] = r.question;
        j["answers"] = r.answers;
        out << j.dump() << '\n';
    }
}

void PipelineConfig::validate() const {
    if (top_k < 1) throw std::invalid_argument("pipeline: top_k must be >= 1");
    adaptation.validate();
}

std::string format_prompt(std::string_view question, std::span<const std::string> passages) {
    std::string out;
    if (!passages.empty()) {
        out += "Context:\n";
        for (const auto& p : passages) {
            out += p;
            out += '\n';
        }
    }
    out += "Question: ";
    out += question;
    out += "\nAnswer:";
    return out;
}

AssembledPrompt assemble_prompt(const Vocab& vocab, std::string_view question, std::span<const std::string> passages,
                                std::size_t token_budget) {
    for (std::size_t used = passages.size() + 1; used-- > 0;) {
        AssembledPrompt p;
        p.text = format_prompt(question, passages.first(used));
        p.ids = vocab.encode(p.text);
        p.passages_used = used;
        if (p.ids.size() <= token_budget) return p;
    }
    throw ContextLengthError("prompt: question alone needs more than " + std::to_string(token_budget) + " tokens");
}

Pipeline::Pipeline(const Bm25Index& index, const Vocab& vocab, TransformerLm& model, PipelineConfig config)
    : index_(index), vocab_(vocab), model_(model), config_(std::move(config)), pristine_(model.snapshot()) {
    config_.validate();
    if (model_.config().vocab_size != vocab_.size()) {
        throw std::invalid_argument("pipeline: model vocabulary size " + std::to_string(model_.config().vocab_size) +
                                    " differs from tokenizer size " + std::to_string(vocab_.size()));
    }
    if (config_.max_new_tokens >= model_.config().context) {
        throw std::invalid_argument("pipeline: max_new_tokens must be below the context length");
    }
}

std::vector<Document> Pipeline::retrieve(std::string_view question) const {
    std::vector<Document> docs;
    for (const auto& hit : index_.retrieve(question, config_.top_k)) docs.push_back(index_.document(hit.doc));
    return docs;
}

AssembledPrompt Pipeline::prompt_for(std::string_view question, std::span<const Document> passages) const {
    std::vector<std::string> texts;
    texts.reserve(passages.size());
    for (const auto& d : passages) texts.push_back(d.text);
    return assemble_prompt(vocab_, question, texts, model_.config().context - config_.max_new_tokens);
}

std::string Pipeline::generate(const AssembledPrompt& prompt) const {
    return vocab_.decode(model_.greedy_generate(prompt.ids, config_.max_new_tokens, Vocab::kEos));
}

Answer Pipeline::answer(const QueryRecord& query, AnswerMode mode) {
    switch (mode) {
        case AnswerMode::naive: return answer_naive(query);
        case AnswerMode::ttarag: return answer_ttarag(query);
        case AnswerMode::woseg: return answer_woseg(query);
    }
    throw std::invalid_argument("pipeline: unknown mode");
}

Answer Pipeline::answer_naive(const QueryRecord& query) {
    const auto t0 = Clock::now();
    Answer a;
    a.query_id = query.id;
    a.mode = AnswerMode::naive;
    const auto docs = retrieve(query.question);
    for (const auto& d : docs) a.retrieved_ids.push_back(d.id);
    a.timings.retrieve = seconds_since(t0);
    const auto prompt = prompt_for(query.question, docs);
    const auto tg = Clock::now();
    a.text = generate(prompt);
    a.timings.generate = seconds_since(tg);
    a.timings.total = seconds_since(t0);
    return a;
}

Answer Pipeline::answer_ttarag(const QueryRecord& query) { return answer_adaptive(query, AnswerMode::ttarag); }
Answer Pipeline::answer_woseg(const QueryRecord& query) { return answer_adaptive(query, AnswerMode::woseg); }

Answer Pipeline::answer_adaptive(const QueryRecord& query, AnswerMode mode) {
    if (model_.generation() != pristine_.generation) {
        throw AdaptationError("pipeline: model parameters differ from the pristine snapshot");
    }
    const auto t0 = Clock::now();
    Answer a;
    a.query_id = query.id;
    a.mode = mode;
    const auto docs = retrieve(query.question);
    for (const auto& d : docs) a.retrieved_ids.push_back(d.id);
    a.timings.retrieve = seconds_since(t0);
    const auto prompt = prompt_for(query.question, docs);

    const auto budget = config_.adaptation.pair_budget;
    const auto pairs = mode == AnswerMode::woseg
                           ? build_whole_passage_set(docs, budget, config_.min_passage_tokens)
                           : build_adaptation_set(docs, budget, config_.min_passage_tokens);

    bool adapted = false;
    if (pairs.empty()) {
        a.fallback = true;
        a.fallback_reason = "no adaptation pairs";
    } else {
        const auto ta = Clock::now();
        try {
            a.trace = adapt(model_, pristine_, vocab_, query.question, pairs, config_.adaptation);
            adapted = !a.trace->failed;
            if (a.trace->failed) {
                a.fallback = true;
                a.fallback_reason = a.trace->failure;
            }
        } catch (const std::exception& e) {
            model_.restore(pristine_);
            model_.zero_grad();
            a.fallback = true;
            a.fallback_reason = e.what();
        }
        a.timings.adapt = seconds_since(ta);
    }

    const auto tg = Clock::now();
    try {
        a.text = generate(prompt);
    } catch (...) {
        if (adapted) model_.restore(pristine_);
        throw;
    }
    a.timings.generate = seconds_since(tg);
    if (adapted) model_.restore(pristine_);
    a.timings.total = seconds_since(t0);
    return a;
}

}  // namespace ttarag
