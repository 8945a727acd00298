#include "retrieval/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "lm/vocab.hpp"

namespace ttarag {

std::vector<std::string> Bm25Index::analyze(std::string_view text) {
    std::vector<std::string> terms;
    for (auto& tok : Vocab::pretokenize(text)) {
        if (tok.size() == 1 && Vocab::is_punctuation(tok[0])) continue;
        for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        terms.push_back(std::move(tok));
    }
    return terms;
}

Bm25Index::Bm25Index(std::vector<Document> documents, Bm25Params params)
    : documents_(std::move(documents)), params_(params) {
    term_counts_.resize(documents_.size());
    lengths_.resize(documents_.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!id_to_doc_.emplace(documents_[i].id, i).second) {
            throw DuplicateIdError("bm25: duplicate document id '" + documents_[i].id + "'");
        }
        const auto terms = analyze(documents_[i].text);
        lengths_[i] = terms.size();
        total += terms.size();
        for (const auto& t : terms) ++term_counts_[i][t];
        for (const auto& [t, tf] : term_counts_[i]) postings_[t].push_back({i, tf});
    }
    avgdl_ = documents_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(documents_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(const std::string& term) const {
    const double n = static_cast<double>(documents_.size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::score_at(std::span<const std::string> query_terms, std::size_t doc) const {
    const auto& counts = term_counts_.at(doc);
    const double avgdl = avgdl_ > 0.0 ? avgdl_ : 1.0;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(lengths_[doc]) / avgdl);
    double s = 0.0;
    for (const auto& t : query_terms) {
        auto it = counts.find(t);
        if (it == counts.end()) continue;
        const double tf = static_cast<double>(it->second);
        s += idf(t) * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return s;
}

double Bm25Index::score(std::span<const std::string> query_terms, std::string_view doc_id) const {
    auto it = id_to_doc_.find(std::string(doc_id));
    if (it == id_to_doc_.end()) throw std::out_of_range("bm25: unknown document id '" + std::string(doc_id) + "'");
    return score_at(query_terms, it->second);
}

std::vector<RetrievalHit> Bm25Index::retrieve(std::string_view query, std::size_t k) const {
    if (k == 0) throw std::invalid_argument("retrieve: k must be at least 1");
    const auto terms = analyze(query);
    std::vector<std::size_t> candidates;
    for (const auto& t : terms) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        for (const auto& p : it->second) candidates.push_back(p.doc);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<RetrievalHit> hits;
    hits.reserve(candidates.size());
    for (std::size_t doc : candidates) {
        const double s = score_at(terms, doc);
        if (s > 0.0) hits.push_back({doc, documents_[doc].id, s});
    }
    auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    const std::size_t n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
    hits.resize(n);
    return hits;
}

bool Bm25Index::same_statistics(const Bm25Index& other) const {
    if (params_ != other.params_ || lengths_ != other.lengths_ || avgdl_ != other.avgdl_ ||
        term_counts_ != other.term_counts_ || postings_.size() != other.postings_.size()) {
        return false;
    }
    for (const auto& [t, list] : postings_) {
        auto it = other.postings_.find(t);
        if (it == other.postings_.end() || it->second != list) return false;
    }
    return true;
}

}  // namespace ttarag
