#include "harness/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "json.hpp"
#include "lm/checkpoint.hpp"
#include "lm/pretrain.hpp"

namespace ttarag {

namespace fs = std::filesystem;

namespace {

using nlohmann::ordered_json;

fs::path out_dir(const RunConfig& c) {
    if (c.out.empty()) throw ConfigError("config: out must name a directory");
    fs::create_directories(c.out);
    return c.out;
}

void echo_config(const RunConfig& c, const fs::path& dir) { write_text(dir / "config.txt", c.dump()); }

const std::string& require_path(const std::string& value, const char* key) {
    if (value.empty()) throw ConfigError(std::string("config: ") + key + " is required for this command");
    if (!fs::exists(value)) throw IoError(std::string(key) + " '" + value + "' does not exist");
    return value;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::vector<Document> load_documents(const std::string& path, std::size_t* malformed = nullptr) {
    Corpus corpus = read_corpus(path);
    if (malformed) *malformed = corpus.malformed.size();
    return std::move(corpus.documents);
}

/// Model, tokenizer and retrieval state for evaluation commands.
struct Loaded {
    Checkpoint ckpt;
    TransformerLm model;
    Bm25Index index;
    std::vector<QueryRecord> dataset;
    std::unique_ptr<Judge> judge;

    RunContext context(std::size_t replicas) const { return {index, ckpt.vocab, model, *judge, replicas}; }
};

Loaded load_for_evaluation(const RunConfig& c) {
    if (c.checkpoint.empty()) throw ConfigError("config: checkpoint is required for this command");
    if (!fs::exists(c.checkpoint)) throw IoError("checkpoint '" + c.checkpoint + "' not found");
    require_path(c.corpus, "corpus");
    require_path(c.dataset, "dataset");
    Checkpoint ckpt = load_checkpoint(c.checkpoint);
    TransformerLm model = instantiate(ckpt);
    Bm25Index index(load_documents(c.corpus), c.bm25);
    auto dataset = read_dataset(c.dataset);
    if (dataset.empty()) throw std::invalid_argument("dataset '" + c.dataset + "' has no records");
    auto judge = make_judge(c.judge, c.judge_url);
    return {std::move(ckpt), std::move(model), std::move(index), std::move(dataset), std::move(judge)};
}

void write_run(const fs::path& dir, const RunReport& report, const std::string& stem = "report") {
    write_text(dir / (stem + ".json"), report_to_json(report));
    write_text(dir / (stem + ".csv"), report_csv(report));
    write_text(dir / (stem == "report" ? "answers.jsonl" : stem + "_answers.jsonl"), answers_jsonl(report));
}

}  // namespace

std::string cmd_gen_bench(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    const SyntheticBenchmark bench = generate_benchmark(c.bench);
    write_benchmark(bench, dir);
    const fs::path abs = fs::absolute(dir);
    char lr[32];
    std::snprintf(lr, sizeof lr, "%g", kBenchmarkAdaptationLr);
    write_text(dir / "run.cfg", "# suggested settings for this benchmark\ncorpus = " + (abs / "corpus.jsonl").string() +
                                    "\ndataset = " + (abs / "qa.jsonl").string() + "\npretrain_corpus = " +
                                    (abs / "pretrain.jsonl").string() + "\nseed = " + std::to_string(c.bench.seed) +
                                    "\nlr = " + lr + "\n");
    echo_config(c, dir);
    return "benchmark: " + std::to_string(bench.retrieval_corpus.size()) + " passages, " +
           std::to_string(bench.pretrain_corpus.size()) + " pretraining documents, " +
           std::to_string(bench.queries.size()) + " questions on " + bench.held_out().name + " (seed " +
           std::to_string(c.bench.seed) + ") in " + dir.string();
}

std::string cmd_pretrain(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    require_path(c.pretrain_corpus, "pretrain_corpus");
    const auto docs = load_documents(c.pretrain_corpus);
    if (docs.empty()) throw std::invalid_argument("pretraining corpus '" + c.pretrain_corpus + "' has no documents");

    // The vocabulary also covers the retrieval corpus so unseen-domain words
    // get their own (untrained) ids instead of collapsing to <unk>.
    std::vector<std::string> texts;
    for (const auto& d : docs) texts.push_back(d.text);
    if (!c.corpus.empty()) {
        require_path(c.corpus, "corpus");
        for (const auto& d : load_documents(c.corpus)) texts.push_back(d.text);
    }
    Vocab vocab = Vocab::build(texts, c.vocab_min_freq);

    LmConfig lm = c.lm;
    lm.vocab_size = vocab.size();
    TransformerLm model(lm);
    std::vector<std::vector<TokenId>> encoded;
    encoded.reserve(docs.size());
    for (const auto& d : docs) encoded.push_back(vocab.encode(d.text));

    const auto t0 = std::chrono::steady_clock::now();
    const PretrainResult result = pretrain(model, encoded, c.pretrain, Vocab::kEos);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path ckpt_path = c.checkpoint.empty() ? dir / "model.ckpt" : fs::path(c.checkpoint);
    save_checkpoint(ckpt_path, {lm, vocab, result.snapshot});

    std::string curve = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, result.loss_curve[i]);
        curve += buf;
    }
    write_text(dir / "loss_curve.csv", curve);
    ordered_json j;
    j["checkpoint"] = ckpt_path.string();
    j["vocab_size"] = vocab.size();
    j["parameters"] = model.parameter_count();
    j["steps"] = c.pretrain.steps;
    j["train_documents"] = result.train_documents;
    j["heldout_documents"] = result.heldout_documents;
    j["initial_heldout_loss"] = result.initial_heldout_loss;
    j["heldout_loss"] = result.heldout_loss;
    j["seconds"] = seconds;
    write_text(dir / "pretrain.json", j.dump(2) + "\n");
    echo_config(c, dir);
    char buf[160];
    std::snprintf(buf, sizeof buf, "pretrained %zu parameters for %zu steps: held-out loss %.4f -> %.4f (%.1f s)",
                  model.parameter_count(), c.pretrain.steps, result.initial_heldout_loss, result.heldout_loss,
                  seconds);
    return std::string(buf) + ", checkpoint " + ckpt_path.string();
}

std::string cmd_index(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    require_path(c.corpus, "corpus");
    Corpus corpus = read_corpus(c.corpus);
    const std::size_t malformed = corpus.malformed.size();
    ordered_json bad = ordered_json::array();
    for (const auto& m : corpus.malformed) bad.push_back({{"line", m.line}, {"reason", m.reason}});
    Bm25Index index(std::move(corpus.documents), c.bm25);
    ordered_json j;
    j["corpus"] = c.corpus;
    j["documents"] = index.size();
    j["terms"] = index.term_count();
    j["average_length"] = index.average_length();
    j["k1"] = index.params().k1;
    j["b"] = index.params().b;
    j["malformed_lines"] = bad;
    write_text(dir / "index.json", j.dump(2) + "\n");
    echo_config(c, dir);
    std::string msg = "indexed " + std::to_string(index.size()) + " documents, " + std::to_string(index.term_count()) +
                      " terms";
    if (malformed) {
        msg += "; skipped " + std::to_string(malformed) + " malformed line(s):";
        for (const auto& b : bad) msg += " " + std::to_string(b["line"].get<std::size_t>());
    }
    return msg;
}

std::string cmd_run(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    const Loaded l = load_for_evaluation(c);
    const RunContext ctx = l.context(c.parallel);
    std::vector<RunReport> reports;
    RunReport main = evaluate_run(l.dataset, ctx, c.pipeline, c.mode);
    if (c.mode != AnswerMode::naive && c.baseline) {
        RunReport naive = evaluate_run(l.dataset, ctx, c.pipeline, AnswerMode::naive);
        attach_naive_baseline(main, naive);
        write_run(dir, naive, "naive_report");
        reports.push_back(std::move(naive));
    }
    write_run(dir, main);
    reports.push_back(main);
    write_text(dir / "summary.txt", format_summary(reports));
    echo_config(c, dir);
    std::string msg = std::string(to_string(c.mode)) + ": " + pct(main.overall_accuracy) + "% over " +
                      std::to_string(main.outcomes.size()) + " queries";
    if (main.overall_delta_vs_naive) {
        msg += " (naive " + pct(reports.front().overall_accuracy) + "%, delta " +
               (*main.overall_delta_vs_naive >= 0 ? "+" : "") + pct(*main.overall_delta_vs_naive) + ")";
    }
    return msg + ", results in " + dir.string();
}

std::string cmd_sweep(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    const Loaded l = load_for_evaluation(c);
    if (c.mode == AnswerMode::naive) throw ConfigError("config: sweep needs an adaptive mode (ttarag or wo-seg)");
    const auto grid = c.effective_grid();
    const SweepTable table = run_sweep(l.dataset, l.context(c.parallel), c.pipeline, c.axis, grid, c.mode);
    write_text(dir / "sweep.csv", sweep_csv(table));
    write_text(dir / "sweep.json", sweep_to_json(table));
    echo_config(c, dir);
    return std::string("sweep over ") + to_string(c.axis) + ": " + std::to_string(table.rows.size()) +
           " settings plus naive baseline, " + (dir / "sweep.csv").string();
}

std::string cmd_ablate(const RunConfig& c) {
    const fs::path dir = out_dir(c);
    const Loaded l = load_for_evaluation(c);
    const AblationReport a = run_ablation(l.dataset, l.context(c.parallel), c.pipeline);
    write_run(dir, a.naive, "naive_report");
    write_run(dir, a.ttarag, "ttarag_report");
    write_run(dir, a.woseg, "woseg_report");
    const std::vector<RunReport> all{a.naive, a.ttarag, a.woseg};
    write_text(dir / "summary.txt", format_summary(all));
    std::string csv = "mode,accuracy,delta_vs_naive,avg_seconds\n";
    for (const auto& r : all) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%.6f\n", to_string(r.mode), r.overall_accuracy,
                      r.overall_accuracy - a.naive.overall_accuracy, r.avg_seconds);
        csv += buf;
    }
    write_text(dir / "ablation.csv", csv);
    echo_config(c, dir);
    const double gap = a.ttarag.overall_accuracy - a.woseg.overall_accuracy;
    return "ablation: naive " + pct(a.naive.overall_accuracy) + "%, ttarag " + pct(a.ttarag.overall_accuracy) +
           "%, wo-seg " + pct(a.woseg.overall_accuracy) + "% (ttarag - wo-seg " + (gap >= 0 ? "+" : "") + pct(gap) +
           ")";
}

std::string cmd_report(const RunConfig& c) {
    if (c.runs.empty()) throw ConfigError("config: runs must list at least one run directory");
    const fs::path dir = out_dir(c);
    std::vector<RunReport> reports;
    for (const auto& run : c.runs) {
        bool found = false;
        for (const char* name : {"naive_report.json", "report.json", "ttarag_report.json", "woseg_report.json"}) {
            const fs::path p = fs::path(run) / name;
            if (!fs::exists(p)) continue;
            reports.push_back(report_from_json(read_text(p)));
            found = true;
        }
        if (!found) throw IoError("run directory '" + run + "' contains no report JSON");
    }
    std::string csv = "mode,domain,queries,correct,accuracy,avg_seconds\n";
    for (const auto& r : reports) {
        for (const auto& d : r.domains) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.2f,%.6f\n", to_string(r.mode), d.domain.c_str(),
                          d.queries, d.correct, d.accuracy, r.avg_seconds);
            csv += buf;
        }
    }
    write_text(dir / "report.csv", csv);
    write_text(dir / "summary.txt", format_summary(reports));
    echo_config(c, dir);
    return "report over " + std::to_string(reports.size()) + " run(s), " + (dir / "summary.txt").string();
}

}  // namespace ttarag
