#include "eval/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace ttarag {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::ordered_json;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string signed_fixed(double v, int digits) { return (v >= 0.0 ? "+" : "") + fixed(v, digits); }

QueryOutcome outcome_for(const QueryRecord& q, const Answer& a, const Judge& judge) {
    QueryOutcome o;
    o.query_id = q.id;
    o.domain = q.domain;
    o.question = q.question;
    o.golds = q.answers;
    o.prediction = a.text;
    o.correct = judge.correct(q.question, a.text, q.answers);
    o.fallback = a.fallback;
    o.fallback_reason = a.fallback_reason;
    o.retrieved_ids = a.retrieved_ids;
    if (a.trace) o.pair_losses = a.trace->pair_losses;
    o.timings = a.timings;
    return o;
}

}  // namespace

void aggregate(RunReport& report) {
    std::map<std::string, DomainScore> by_domain;
    std::map<std::string, std::optional<double>> old_deltas;
    for (const auto& d : report.domains) old_deltas[d.domain] = d.delta_vs_naive;
    report.fallbacks = 0;
    report.total_seconds = 0.0;
    std::vector<double> loss_sum;
    std::vector<std::size_t> loss_count;
    for (const auto& o : report.outcomes) {
        auto& d = by_domain[o.domain];
        d.domain = o.domain;
        ++d.queries;
        if (o.correct) ++d.correct;
        if (o.fallback) ++report.fallbacks;
        report.total_seconds += o.timings.total;
        for (std::size_t i = 0; i < o.pair_losses.size(); ++i) {
            if (loss_sum.size() <= i) {
                loss_sum.push_back(0.0);
                loss_count.push_back(0);
            }
            loss_sum[i] += o.pair_losses[i];
            ++loss_count[i];
        }
    }
    report.domains.clear();
    std::size_t total = 0, correct = 0;
    for (auto& [name, d] : by_domain) {
        d.accuracy = 100.0 * static_cast<double>(d.correct) / static_cast<double>(d.queries);
        d.delta_vs_naive = old_deltas[name];
        total += d.queries;
        correct += d.correct;
        report.domains.push_back(d);
    }
    report.overall_accuracy = total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    report.avg_seconds = total ? report.total_seconds / static_cast<double>(total) : 0.0;
    report.loss_trajectory.clear();
    for (std::size_t i = 0; i < loss_sum.size(); ++i) {
        report.loss_trajectory.push_back(loss_sum[i] / static_cast<double>(loss_count[i]));
    }
}

RunReport evaluate_run(std::span<const QueryRecord> dataset, const RunContext& ctx, const PipelineConfig& config,
                       AnswerMode mode) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_run: empty dataset");
    config.validate();
    const std::size_t replicas = std::clamp<std::size_t>(ctx.replicas, 1, dataset.size());
    const auto t0 = Clock::now();

    std::vector<QueryOutcome> outcomes(dataset.size());
    std::vector<std::exception_ptr> errors(replicas);
    auto work = [&](std::size_t r) {
        try {
            TransformerLm model = ctx.model.clone();
            Pipeline pipeline(ctx.index, ctx.vocab, model, config);
            for (std::size_t i = r; i < dataset.size(); i += replicas) {
                outcomes[i] = outcome_for(dataset[i], pipeline.answer(dataset[i], mode), ctx.judge);
            }
        } catch (...) {
            errors[r] = std::current_exception();
        }
    };
    if (replicas == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t r = 0; r < replicas; ++r) threads.emplace_back(work, r);
        for (auto& t : threads) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    RunReport report;
    report.mode = mode;
    report.judge = ctx.judge.kind();
    report.outcomes = std::move(outcomes);
    std::sort(report.outcomes.begin(), report.outcomes.end(),
              [](const QueryOutcome& a, const QueryOutcome& b) { return a.query_id < b.query_id; });
    aggregate(report);
    report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return report;
}

void attach_naive_baseline(RunReport& report, const RunReport& naive) {
    std::set<std::string> a, b;
    for (const auto& o : report.outcomes) a.insert(o.query_id);
    for (const auto& o : naive.outcomes) b.insert(o.query_id);
    if (a != b) throw std::invalid_argument("baseline: runs cover different query sets");
    std::map<std::string, double> naive_acc;
    for (const auto& d : naive.domains) naive_acc[d.domain] = d.accuracy;
    for (auto& d : report.domains) d.delta_vs_naive = d.accuracy - naive_acc.at(d.domain);
    report.overall_delta_vs_naive = report.overall_accuracy - naive.overall_accuracy;
}

const char* to_string(SweepAxis axis) { return axis == SweepAxis::learning_rate ? "lr" : "pairs"; }

SweepAxis parse_sweep_axis(std::string_view text) {
    if (text == "lr" || text == "learning-rate") return SweepAxis::learning_rate;
    if (text == "pairs" || text == "pair-count") return SweepAxis::pair_count;
    throw std::invalid_argument("unknown sweep axis '" + std::string(text) + "' (expected lr or pairs)");
}

SweepTable run_sweep(std::span<const QueryRecord> dataset, const RunContext& ctx, const PipelineConfig& config,
                     SweepAxis axis, std::span<const double> grid, AnswerMode mode) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    if (mode == AnswerMode::naive) throw std::invalid_argument("sweep: mode must be adaptive");
    for (double v : grid) {
        if (axis == SweepAxis::pair_count && (v < 0.0 || v != std::floor(v))) {
            throw std::invalid_argument("sweep: pair counts must be non-negative integers");
        }
    }
    SweepTable table;
    table.axis = axis;
    table.mode = mode;
    const RunReport naive = evaluate_run(dataset, ctx, config, AnswerMode::naive);
    table.baseline = {0.0, naive.overall_accuracy, naive.avg_seconds};
    for (double v : grid) {
        PipelineConfig c = config;
        if (axis == SweepAxis::learning_rate) {
            c.adaptation.learning_rate = v;
        } else {
            c.adaptation.pair_budget = static_cast<std::size_t>(v);
        }
        const RunReport r = evaluate_run(dataset, ctx, c, mode);
        table.rows.push_back({v, r.overall_accuracy, r.avg_seconds});
    }
    return table;
}

AblationReport run_ablation(std::span<const QueryRecord> dataset, const RunContext& ctx,
                            const PipelineConfig& config) {
    AblationReport out;
    out.naive = evaluate_run(dataset, ctx, config, AnswerMode::naive);
    out.ttarag = evaluate_run(dataset, ctx, config, AnswerMode::ttarag);
    out.woseg = evaluate_run(dataset, ctx, config, AnswerMode::woseg);
    attach_naive_baseline(out.ttarag, out.naive);
    attach_naive_baseline(out.woseg, out.naive);
    return out;
}

std::string format_summary(std::span<const RunReport> reports) {
    std::set<std::string> domain_set;
    for (const auto& r : reports)
        for (const auto& d : r.domains) domain_set.insert(d.domain);
    std::vector<std::string> cols(domain_set.begin(), domain_set.end());
    cols.push_back("overall");

    const RunReport* naive = nullptr;
    for (const auto& r : reports) {
        if (r.mode == AnswerMode::naive) naive = &r;
    }

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"method"});
    rows[0].insert(rows[0].end(), cols.begin(), cols.end());
    auto cell_for = [&](const RunReport& r, const std::string& col) -> const DomainScore* {
        for (const auto& d : r.domains) {
            if (d.domain == col) return &d;
        }
        return nullptr;
    };
    for (const auto& r : reports) {
        std::vector<std::string> row{to_string(r.mode)};
        for (const auto& c : cols) {
            if (c == "overall") {
                row.push_back(fixed(r.overall_accuracy, 1));
            } else {
                const DomainScore* d = cell_for(r, c);
                row.push_back(d ? fixed(d->accuracy, 1) : "-");
            }
        }
        rows.push_back(std::move(row));
    }
    if (naive) {
        for (const auto& r : reports) {
            if (r.mode == AnswerMode::naive) continue;
            std::vector<std::string> row{std::string("delta ") + to_string(r.mode)};
            for (const auto& c : cols) {
                if (c == "overall") {
                    row.push_back(signed_fixed(r.overall_accuracy - naive->overall_accuracy, 1));
                    continue;
                }
                const DomainScore* d = cell_for(r, c);
                const DomainScore* n = cell_for(*naive, c);
                row.push_back(d && n ? signed_fixed(d->accuracy - n->accuracy, 1) : "-");
            }
            rows.push_back(std::move(row));
        }
    }

    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream out;
    out << "Accuracy (%)\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << "  ";
            if (i == 0) {
                out << row[i] << std::string(width[i] - row[i].size(), ' ');
            } else {
                out << std::string(width[i] - row[i].size(), ' ') << row[i];
            }
        }
        out << '\n';
    }
    out << "\nTiming\n";
    for (const auto& r : reports) {
        out << to_string(r.mode) << ": " << r.outcomes.size() << " queries, total " << fixed(r.total_seconds, 2)
            << " s, avg " << fixed(r.avg_seconds, 4) << " s";
        if (r.mode != AnswerMode::naive) out << ", fallbacks " << r.fallbacks;
        out << '\n';
    }
    for (const auto& r : reports) {
        if (r.loss_trajectory.empty()) continue;
        out << "\nMean adaptation loss by pair (" << to_string(r.mode) << "):";
        for (double l : r.loss_trajectory) out << ' ' << fixed(l, 4);
        out << '\n';
    }
    return out.str();
}

std::string report_csv(const RunReport& report) {
    std::ostringstream out;
    out << "domain,queries,correct,accuracy,delta_vs_naive\n";
    std::size_t total = 0, correct = 0;
    for (const auto& d : report.domains) {
        out << d.domain << ',' << d.queries << ',' << d.correct << ',' << fixed(d.accuracy, 2) << ','
            << (d.delta_vs_naive ? fixed(*d.delta_vs_naive, 2) : "") << '\n';
        total += d.queries;
        correct += d.correct;
    }
    out << "overall," << total << ',' << correct << ',' << fixed(report.overall_accuracy, 2) << ','
        << (report.overall_delta_vs_naive ? fixed(*report.overall_delta_vs_naive, 2) : "") << '\n';
    return out.str();
}

std::string sweep_csv(const SweepTable& table) {
    std::ostringstream out;
    out << to_string(table.axis) << ",accuracy,avg_seconds\n";
    out << "naive," << fixed(table.baseline.accuracy, 2) << ',' << fixed(table.baseline.avg_seconds, 6) << '\n';
    for (const auto& r : table.rows) {
        char value[64];
        if (table.axis == SweepAxis::pair_count) {
            std::snprintf(value, sizeof value, "%.0f", r.value);
        } else {
            std::snprintf(value, sizeof value, "%g", r.value);
        }
        out << value << ',' << fixed(r.accuracy, 2) << ',' << fixed(r.avg_seconds, 6) << '\n';
    }
    return out.str();
}

namespace {

ordered_json timings_json(const StageTimings& t) {
    return {{"retrieve", t.retrieve}, {"adapt", t.adapt}, {"generate", t.generate}, {"total", t.total}};
}

StageTimings timings_from(const nlohmann::json& j) {
    return {j.at("retrieve").get<double>(), j.at("adapt").get<double>(), j.at("generate").get<double>(),
            j.at("total").get<double>()};
}

ordered_json outcome_json(const QueryOutcome& o) {
    ordered_json j;
    j["id"] = o.query_id;
    j["domain"] = o.domain;
    j["question"] = o.question;
    j["answers"] = o.golds;
    j["prediction"] = o.prediction;
    j["correct"] = o.correct;
    j["fallback"] = o.fallback;
    if (o.fallback) j["fallback_reason"] = o.fallback_reason;
    j["retrieved"] = o.retrieved_ids;
    j["pair_losses"] = o.pair_losses;
    j["timings"] = timings_json(o.timings);
    return j;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    ordered_json j;
    j["mode"] = to_string(report.mode);
    j["judge"] = to_string(report.judge);
    j["overall_accuracy"] = report.overall_accuracy;
    j["overall_delta_vs_naive"] =
        report.overall_delta_vs_naive ? ordered_json(*report.overall_delta_vs_naive) : ordered_json(nullptr);
    auto& domains = j["domains"];
    domains = ordered_json::array();
    for (const auto& d : report.domains) {
        domains.push_back({{"domain", d.domain},
                           {"queries", d.queries},
                           {"correct", d.correct},
                           {"accuracy", d.accuracy},
                           {"delta_vs_naive", d.delta_vs_naive ? ordered_json(*d.delta_vs_naive) : ordered_json(nullptr)}});
    }
    j["loss_trajectory"] = report.loss_trajectory;
    j["fallbacks"] = report.fallbacks;
    j["total_seconds"] = report.total_seconds;
    j["avg_seconds"] = report.avg_seconds;
    j["wall_seconds"] = report.wall_seconds;
    auto& outcomes = j["outcomes"];
    outcomes = ordered_json::array();
    for (const auto& o : report.outcomes) outcomes.push_back(outcome_json(o));
    return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
    RunReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.mode = parse_answer_mode(j.at("mode").get<std::string>());
        r.judge = parse_judge_kind(j.at("judge").get<std::string>());
        for (const auto& o : j.at("outcomes")) {
            QueryOutcome q;
            q.query_id = o.at("id").get<std::string>();
            q.domain = o.at("domain").get<std::string>();
            q.question = o.at("question").get<std::string>();
            q.golds = o.at("answers").get<std::vector<std::string>>();
            q.prediction = o.at("prediction").get<std::string>();
            q.correct = o.at("correct").get<bool>();
            q.fallback = o.at("fallback").get<bool>();
            q.fallback_reason = o.value("fallback_reason", std::string());
            q.retrieved_ids = o.at("retrieved").get<std::vector<std::string>>();
            q.pair_losses = o.at("pair_losses").get<std::vector<double>>();
            q.timings = timings_from(o.at("timings"));
            r.outcomes.push_back(std::move(q));
        }
        for (const auto& d : j.at("domains")) {
            DomainScore s;
            s.domain = d.at("domain").get<std::string>();
            if (!d.at("delta_vs_naive").is_null()) s.delta_vs_naive = d.at("delta_vs_naive").get<double>();
            r.domains.push_back(s);
        }
        aggregate(r);
        if (!j.at("overall_delta_vs_naive").is_null()) {
            r.overall_delta_vs_naive = j.at("overall_delta_vs_naive").get<double>();
        }
        r.wall_seconds = j.at("wall_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("report: malformed JSON: ") + e.what());
    }
    return r;
}

std::string sweep_to_json(const SweepTable& table) {
    ordered_json j;
    j["axis"] = to_string(table.axis);
    j["mode"] = to_string(table.mode);
    j["baseline"] = {{"accuracy", table.baseline.accuracy}, {"avg_seconds", table.baseline.avg_seconds}};
    auto& rows = j["rows"];
    rows = ordered_json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"value", r.value}, {"accuracy", r.accuracy}, {"avg_seconds", r.avg_seconds}});
    }
    return j.dump(2) + "\n";
}

SweepTable sweep_from_json(std::string_view text) {
    SweepTable t;
    try {
        const auto j = nlohmann::json::parse(text);
        t.axis = parse_sweep_axis(j.at("axis").get<std::string>());
        t.mode = parse_answer_mode(j.at("mode").get<std::string>());
        t.baseline.accuracy = j.at("baseline").at("accuracy").get<double>();
        t.baseline.avg_seconds = j.at("baseline").at("avg_seconds").get<double>();
        for (const auto& r : j.at("rows")) {
            t.rows.push_back({r.at("value").get<double>(), r.at("accuracy").get<double>(),
                              r.at("avg_seconds").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("sweep: malformed JSON: ") + e.what());
    }
    return t;
}

std::string answers_jsonl(const RunReport& report) {
    std::string out;
    for (const auto& o : report.outcomes) {
        ordered_json j;
        j["id"] = o.query_id;
        j["domain"] = o.domain;
        j["prediction"] = o.prediction;
        j["correct"] = o.correct;
        j["fallback"] = o.fallback;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ttarag
