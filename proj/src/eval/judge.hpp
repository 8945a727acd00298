#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ttarag {

enum class JudgeKind { exact, token_f1, remote };

const char* to_string(JudgeKind kind);
/// Accepts "exact", "token-f1"/"f1", "remote".
JudgeKind parse_judge_kind(std::string_view text);

/// Lowercase, punctuation removed, whitespace collapsed to single spaces.
std::string normalize_answer(std::string_view text);
std::vector<std::string> answer_tokens(std::string_view text);

/// True iff some normalized gold occurs as a contiguous token run inside the
/// normalized prediction. Golds that normalize to nothing never match.
bool judge_exact(std::string_view prediction, std::span<const std::string> golds);

/// Token-bag F1 between normalized strings. Two empty strings score 1.
double judge_f1(std::string_view prediction, std::string_view gold);

struct Judgement {
    std::string query_id;
    bool correct = false;
    JudgeKind kind = JudgeKind::exact;
};

class JudgeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Verdict source shared by all evaluation code. Implementations must be
/// deterministic in (question, prediction, golds) and safe to call from
/// several threads.
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeKind kind() const = 0;
    virtual bool correct(std::string_view question, std::string_view prediction,
                         std::span<const std::string> golds) const = 0;
};

class ExactJudge final : public Judge {
public:
    JudgeKind kind() const override { return JudgeKind::exact; }
    bool correct(std::string_view question, std::string_view prediction,
                 std::span<const std::string> golds) const override;
};

/// Correct when the best F1 over golds reaches `threshold`.
class F1Judge final : public Judge {
public:
    explicit F1Judge(double threshold = 0.5);
    JudgeKind kind() const override { return JudgeKind::token_f1; }
    bool correct(std::string_view question, std::string_view prediction,
                 std::span<const std::string> golds) const override;
    double threshold() const { return threshold_; }

private:
    double threshold_;
};

/// One HTTP POST per judgement (see docs/remote_judge.md):
///   request  {"question": str, "prediction": str, "golds": [str]}
///   response {"verdict": "correct" | "incorrect"}
/// Transport failures and malformed responses throw JudgeError.
class RemoteJudge final : public Judge {
public:
    /// `url` is "http://host:port/path".
    explicit RemoteJudge(std::string url, double timeout_seconds = 30.0);
    JudgeKind kind() const override { return JudgeKind::remote; }
    bool correct(std::string_view question, std::string_view prediction,
                 std::span<const std::string> golds) const override;

private:
    std::string host_;
    int port_ = 80;
    std::string path_;
    double timeout_;
};

/// `remote_url` is only used for JudgeKind::remote.
std::unique_ptr<Judge> make_judge(JudgeKind kind, const std::string& remote_url = {});

}  // namespace ttarag
