#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttarag {

struct Document {
    std::string id;
    std::string domain;
    std::string text;
    bool operator==(const Document&) const = default;
};

/// A JSONL line that could not be turned into a record.
struct MalformedLine {
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct Corpus {
    std::vector<Document> documents;
    std::vector<MalformedLine> malformed;
};

class DuplicateIdError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a UTF-8 JSONL corpus (`{"id", "domain", "text"}` per line). Blank
/// lines are skipped, malformed lines are collected, a repeated id throws
/// DuplicateIdError naming both line numbers.
Corpus read_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

}  // namespace ttarag
