#include "eval/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "retrieval/bm25.hpp"

namespace ttarag {

namespace {

class WordMaker {
public:
    explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {
        for (const char* w : {"the", "of", "is", "what", "context", "question", "answer"}) used_.insert(w);
    }

    std::string make() {
        static constexpr std::string_view consonants = "bdfgklmnprstvz";
        static constexpr std::string_view vowels = "aeiou";
        static constexpr std::string_view codas = "lnrsx";
        std::uniform_int_distribution<std::size_t> pick_c(0, consonants.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_v(0, vowels.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_coda(0, codas.size() - 1);
        std::uniform_int_distribution<int> syllables(2, 3);
        std::bernoulli_distribution closed(0.3);
        for (;;) {
            std::string w;
            const int n = syllables(rng_);
            for (int s = 0; s < n; ++s) {
                w.push_back(consonants[pick_c(rng_)]);
                w.push_back(vowels[pick_v(rng_)]);
            }
            if (closed(rng_)) w.push_back(codas[pick_coda(rng_)]);
            if (used_.insert(w).second) return w;
        }
    }

private:
    std::mt19937_64& rng_;
    std::set<std::string> used_;
};

std::string domain_name(std::size_t i) { return "domain" + std::to_string(i); }

std::string padded(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

std::string fact_passage(const std::string& attribute, const std::string& entity, const std::string& value) {
    return "the " + attribute + " of " + entity + " is " + value + ".";
}

std::string fact_question(const std::string& attribute, const std::string& entity) {
    return "what is the " + attribute + " of " + entity + "?";
}

std::vector<std::string> DomainSpec::content_words() const {
    std::vector<std::string> words(attributes);
    words.insert(words.end(), entities.begin(), entities.end());
    words.insert(words.end(), values.begin(), values.end());
    return words;
}

SyntheticBenchmark generate_benchmark(const BenchmarkOptions& options) {
    if (options.domains < 2) throw std::invalid_argument("benchmark: need at least two domains");
    if (options.attributes_per_domain == 0 || options.facts_per_domain == 0) {
        throw std::invalid_argument("benchmark: facts and attributes per domain must be positive");
    }
    if (options.context_passages == 0) throw std::invalid_argument("benchmark: context_passages must be positive");
    SyntheticBenchmark bench;
    bench.options = options;
    std::mt19937_64 rng(options.seed);
    WordMaker words(rng);
    const std::size_t attrs = options.attributes_per_domain;
    const std::size_t entities = (options.facts_per_domain + attrs - 1) / attrs;

    for (std::size_t d = 0; d < options.domains; ++d) {
        DomainSpec spec;
        spec.name = domain_name(d);
        spec.held_out = d + 1 == options.domains;
        for (std::size_t a = 0; a < attrs; ++a) spec.attributes.push_back(words.make());
        for (std::size_t e = 0; e < entities; ++e) spec.entities.push_back(words.make());
        for (std::size_t f = 0; f < options.facts_per_domain; ++f) spec.values.push_back(words.make());
        bench.domains.push_back(std::move(spec));
    }

    std::vector<Document> pretrain_passages;
    for (const auto& spec : bench.domains) {
        for (std::size_t f = 0; f < options.facts_per_domain; ++f) {
            Document doc{spec.name + "-" + padded(f), spec.name,
                         fact_passage(spec.attributes[f % attrs], spec.entities[f / attrs], spec.values[f])};
            if (!spec.held_out) pretrain_passages.push_back({"p-" + doc.id, doc.domain, doc.text});
            bench.retrieval_corpus.push_back(std::move(doc));
        }
    }

    // Pretraining QA documents are rendered exactly like inference prompts,
    // with the answer appended, over retrieval from the pretraining domains.
    const Bm25Index pretrain_index(pretrain_passages);
    bench.pretrain_corpus = pretrain_passages;
    for (const auto& spec : bench.domains) {
        if (spec.held_out) continue;
        for (std::size_t f = 0; f < options.facts_per_domain; ++f) {
            const std::string& attr = spec.attributes[f % attrs];
            const std::string& entity = spec.entities[f / attrs];
            const std::string question = fact_question(attr, entity);
            std::vector<std::size_t> facts;
            for (const auto& hit : pretrain_index.retrieve(question, options.context_passages)) {
                const std::string& id = pretrain_index.document(hit.doc).id;
                facts.push_back(std::stoul(id.substr(id.rfind('-') + 1)));
            }
            std::vector<std::string> context;
            for (std::size_t g : facts) {
                context.push_back(fact_passage(spec.attributes[g % attrs], spec.entities[g / attrs], spec.values[g]));
            }
            bench.pretrain_corpus.push_back({"qa-" + spec.name + "-" + padded(f), spec.name,
                                             format_prompt(question, context) + " " + spec.values[f]});
        }
    }

    const DomainSpec& held = bench.held_out();
    std::vector<std::size_t> order(options.facts_per_domain);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(options.queries_per_domain, order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t f = order[i];
        bench.queries.push_back({"q-" + held.name + "-" + padded(i), held.name,
                                 fact_question(held.attributes[f % attrs], held.entities[f / attrs]),
                                 {held.values[f]}});
    }
    return bench;
}

void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_corpus(dir / "corpus.jsonl", bench.retrieval_corpus);
    write_corpus(dir / "pretrain.jsonl", bench.pretrain_corpus);
    write_dataset(dir / "qa.jsonl", bench.queries);

    nlohmann::ordered_json meta;
    meta["seed"] = bench.options.seed;
    meta["domains"] = bench.options.domains;
    meta["facts_per_domain"] = bench.options.facts_per_domain;
    meta["queries_per_domain"] = bench.options.queries_per_domain;
    meta["attributes_per_domain"] = bench.options.attributes_per_domain;
    meta["context_passages"] = bench.options.context_passages;
    meta["held_out_domain"] = bench.held_out().name;
    meta["passage_template"] = "the <attribute> of <entity> is <value>.";
    meta["question_template"] = "what is the <attribute> of <entity>?";
    auto& specs = meta["domain_specs"];
    specs = nlohmann::ordered_json::array();
    for (const auto& d : bench.domains) {
        nlohmann::ordered_json j;
        j["name"] = d.name;
        j["held_out"] = d.held_out;
        j["attributes"] = d.attributes;
        j["entities"] = d.entities;
        j["values"] = d.values;
        specs.push_back(std::move(j));
    }
    std::ofstream out(dir / "benchmark.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "benchmark.json").string() + "'");
    out << meta.dump(2) << '\n';
}

}  // namespace ttarag
