#include "eval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace ttarag {

const char* to_string(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::exact: return "exact";
        case JudgeKind::token_f1: return "token-f1";
        case JudgeKind::remote: return "remote";
    }
    return "unknown";
}

JudgeKind parse_judge_kind(std::string_view text) {
    if (text == "exact") return JudgeKind::exact;
    if (text == "token-f1" || text == "f1") return JudgeKind::token_f1;
    if (text == "remote") return JudgeKind::remote;
    throw std::invalid_argument("unknown judge '" + std::string(text) + "' (expected exact, token-f1, remote)");
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c)) continue;
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> answer_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream in(normalize_answer(text));
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

bool judge_exact(std::string_view prediction, std::span<const std::string> golds) {
    const auto pred = answer_tokens(prediction);
    for (const auto& gold : golds) {
        const auto g = answer_tokens(gold);
        if (g.empty()) continue;
        if (std::search(pred.begin(), pred.end(), g.begin(), g.end()) != pred.end()) return true;
    }
    return false;
}

double judge_f1(std::string_view prediction, std::string_view gold) {
    const auto pred = answer_tokens(prediction);
    const auto ref = answer_tokens(gold);
    if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : ref) ++counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(common) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

bool ExactJudge::correct(std::string_view, std::string_view prediction, std::span<const std::string> golds) const {
    return judge_exact(prediction, golds);
}

F1Judge::F1Judge(double threshold) : threshold_(threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("F1 judge: threshold must be in (0, 1]");
}

bool F1Judge::correct(std::string_view, std::string_view prediction, std::span<const std::string> golds) const {
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, judge_f1(prediction, g));
    return best >= threshold_;
}

RemoteJudge::RemoteJudge(std::string url, double timeout_seconds) : timeout_(timeout_seconds) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0) throw std::invalid_argument("remote judge: url must start with http://");
    std::string rest = url.substr(scheme.size());
    const auto slash = rest.find('/');
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    std::string authority = rest.substr(0, slash);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        try {
            port_ = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("remote judge: bad port in '" + url + "'");
        }
        authority.resize(colon);
    }
    if (authority.empty()) throw std::invalid_argument("remote judge: missing host in '" + url + "'");
    host_ = authority;
}

bool RemoteJudge::correct(std::string_view question, std::string_view prediction,
                          std::span<const std::string> golds) const {
    nlohmann::json body;
    body["question"] = question;
    body["prediction"] = prediction;
    body["golds"] = std::vector<std::string>(golds.begin(), golds.end());

    httplib::Client client(host_, port_);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) throw JudgeError("remote judge: request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw JudgeError("remote judge: HTTP status " + std::to_string(res->status));
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw JudgeError("remote judge: response is not JSON");
    }
    if (!reply.is_object() || !reply.contains("verdict") || !reply["verdict"].is_string()) {
        throw JudgeError("remote judge: response lacks a string \"verdict\"");
    }
    const auto verdict = reply["verdict"].get<std::string>();
    if (verdict == "correct") return true;
    if (verdict == "incorrect") return false;
    throw JudgeError("remote judge: unknown verdict '" + verdict + "'");
}

std::unique_ptr<Judge> make_judge(JudgeKind kind, const std::string& remote_url) {
    switch (kind) {
        case JudgeKind::exact: return std::make_unique<ExactJudge>();
        case JudgeKind::token_f1: return std::make_unique<F1Judge>();
        case JudgeKind::remote:
            if (remote_url.empty()) throw std::invalid_argument("remote judge: judge_url is required");
            return std::make_unique<RemoteJudge>(remote_url);
    }
    throw std::invalid_argument("unknown judge kind");
}

}  // namespace ttarag
