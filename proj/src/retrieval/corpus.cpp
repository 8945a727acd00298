#include "retrieval/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace ttarag {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl) {
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> first_line;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= jsonl.size()) {
        const std::size_t nl = jsonl.find('\n', pos);
        std::string_view line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? jsonl.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            corpus.malformed.push_back({line_no, std::string("invalid JSON: ") + e.what()});
            continue;
        }
        const bool ok = j.is_object() && j.contains("id") && j["id"].is_string() && j.contains("domain") &&
                        j["domain"].is_string() && j.contains("text") && j["text"].is_string();
        if (!ok) {
            corpus.malformed.push_back({line_no, "expected string fields id, domain, text"});
            continue;
        }
        Document doc{j["id"].get<std::string>(), j["domain"].get<std::string>(), j["text"].get<std::string>()};
        auto [it, inserted] = first_line.emplace(doc.id, line_no);
        if (!inserted) {
            throw DuplicateIdError("corpus: duplicate id '" + doc.id + "' on lines " + std::to_string(it->second) +
                                   " and " + std::to_string(line_no));
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& d : docs) {
        nlohmann::ordered_json j;
        j["id"] = d.id;
        j["domain"] = d.domain;
        j["text"] = d.text;
        out << j.dump() << '\n';
    }
}

}  // namespace ttarag
