#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "retrieval/corpus.hpp"

namespace ttarag {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    bool operator==(const Bm25Params&) const = default;
};

struct RetrievalHit {
    std::size_t doc = 0;  // position in the indexed corpus
    std::string id;
    double score = 0.0;
};

/// Okapi BM25 over an immutable document set.
///
///   score(q, d) = sum_{t in q} idf(t) * tf(t,d) * (k1 + 1)
///                                  / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
///   idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
///
/// Query terms are a bag: a repeated term contributes once per occurrence.
class Bm25Index {
public:
    Bm25Index() = default;
    explicit Bm25Index(std::vector<Document> documents, Bm25Params params = {});

    /// Lowercased pretokens with punctuation-only tokens dropped.
    static std::vector<std::string> analyze(std::string_view text);

    double idf(const std::string& term) const;
    /// Throws std::out_of_range for an unknown document id.
    double score(std::span<const std::string> query_terms, std::string_view doc_id) const;
    double score_at(std::span<const std::string> query_terms, std::size_t doc) const;

    /// Top-k documents by descending score, ties by ascending id; documents
    /// scoring zero are excluded. Requires k >= 1.
    std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) const;

    const std::vector<Document>& documents() const { return documents_; }
    const Document& document(std::size_t i) const { return documents_.at(i); }
    std::size_t size() const { return documents_.size(); }
    const Bm25Params& params() const { return params_; }
    double average_length() const { return avgdl_; }
    std::size_t document_length(std::size_t i) const { return lengths_.at(i); }
    std::size_t document_frequency(const std::string& term) const;
    std::size_t term_count() const { return postings_.size(); }

    /// Equality of all corpus statistics.
    bool same_statistics(const Bm25Index& other) const;

private:
    struct Posting {
        std::size_t doc;
        std::size_t tf;
        bool operator==(const Posting&) const = default;
    };

    std::vector<Document> documents_;
    Bm25Params params_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::size_t> id_to_doc_;
    std::vector<std::unordered_map<std::string, std::size_t>> term_counts_;
    std::vector<std::size_t> lengths_;
    double avgdl_ = 0.0;
};

}  // namespace ttarag
