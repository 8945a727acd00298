#include "harness/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "eval/report.hpp"

namespace ttarag {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "none") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ConfigError("config: " + std::string(key) + " expects a number, got '" + t + "'");
    }
    return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ConfigError("config: " + std::string(key) + " expects a non-negative integer, got '" + t + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("config: " + std::string(key) + " expects true or false, got '" + t + "'");
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

void require(bool ok, std::string_view key, const char* what) {
    if (!ok) throw ConfigError("config: " + std::string(key) + " " + what);
}

struct Entry {
    ConfigKey key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

using SizeRef = std::function<std::size_t&(RunConfig&)>;
using DoubleRef = std::function<double&(RunConfig&)>;

Entry size_entry(const char* name, const char* help, SizeRef ref, std::size_t min = 0) {
    return {{name, help},
            [=](RunConfig& c, std::string_view v) {
                const auto x = parse_uint(name, v);
                if (x < min) throw ConfigError("config: " + std::string(name) + " must be >= " + std::to_string(min));
                ref(c) = static_cast<std::size_t>(x);
            },
            [=](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry double_entry(const char* name, const char* help, DoubleRef ref, double min, double max, bool allow_inf = false) {
    return {{name, help},
            [=](RunConfig& c, std::string_view v) {
                const double x = parse_double(name, v);
                if (std::isinf(x)) {
                    require(allow_inf, name, "must be finite");
                } else if (!(x >= min && x <= max)) {
                    throw ConfigError("config: " + std::string(name) + " must lie in [" + format_double(min) + ", " +
                                      format_double(max) + "], got " + format_double(x));
                }
                ref(c) = x;
            },
            [=](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Entry string_entry(const char* name, const char* help, std::string RunConfig::*member) {
    return {{name, help}, [=](RunConfig& c, std::string_view v) { c.*member = trim(v); },
            [=](const RunConfig& c) { return c.*member; }};
}

constexpr double kBig = std::numeric_limits<double>::max();

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        string_entry("out", "output directory", &RunConfig::out),
        string_entry("corpus", "retrieval corpus JSONL (id, domain, text)", &RunConfig::corpus),
        string_entry("dataset", "QA dataset JSONL (id, domain, question, answers)", &RunConfig::dataset),
        string_entry("pretrain_corpus", "pretraining corpus JSONL (id, domain, text)", &RunConfig::pretrain_corpus),
        string_entry("checkpoint", "model checkpoint path", &RunConfig::checkpoint),
        {{"runs", "comma-separated run directories for report"},
         [](RunConfig& c, std::string_view v) { c.runs = split_list(v); },
         [](const RunConfig& c) { return join(c.runs); }},
        {{"seed", "seed for benchmark generation and pretraining order"},
         [](RunConfig& c, std::string_view v) {
             c.seed = parse_uint("seed", v);
             c.bench.seed = c.seed;
             c.pretrain.seed = c.seed;
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {{"mode", "naive | ttarag | wo-seg"},
         [](RunConfig& c, std::string_view v) {
             try {
                 c.mode = parse_answer_mode(trim(v));
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("config: mode: ") + e.what());
             }
         },
         [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
        {{"baseline", "adaptive runs also evaluate naive for delta columns (true|false)"},
         [](RunConfig& c, std::string_view v) { c.baseline = parse_bool("baseline", v); },
         [](const RunConfig& c) { return std::string(c.baseline ? "true" : "false"); }},
        size_entry("parallel", "pipeline replicas evaluating queries concurrently",
                   [](RunConfig& c) -> std::size_t& { return c.parallel; }, 1),
        size_entry("embed_dim", "model embedding width", [](RunConfig& c) -> std::size_t& { return c.lm.embed_dim; }, 1),
        size_entry("layers", "transformer blocks", [](RunConfig& c) -> std::size_t& { return c.lm.layers; }, 1),
        size_entry("heads", "attention heads (must divide embed_dim)",
                   [](RunConfig& c) -> std::size_t& { return c.lm.heads; }, 1),
        size_entry("context", "context length in tokens", [](RunConfig& c) -> std::size_t& { return c.lm.context; }, 2),
        {{"model_seed", "parameter initialization seed"},
         [](RunConfig& c, std::string_view v) { c.lm.seed = parse_uint("model_seed", v); },
         [](const RunConfig& c) { return std::to_string(c.lm.seed); }},
        size_entry("vocab_min_freq", "minimum token count for the vocabulary",
                   [](RunConfig& c) -> std::size_t& { return c.vocab_min_freq; }, 1),
        size_entry("pretrain_steps", "pretraining optimizer steps",
                   [](RunConfig& c) -> std::size_t& { return c.pretrain.steps; }),
        double_entry("pretrain_lr", "pretraining peak learning rate",
                     [](RunConfig& c) -> double& { return c.pretrain.learning_rate; }, 0.0, 10.0),
        size_entry("pretrain_batch", "documents per pretraining step",
                   [](RunConfig& c) -> std::size_t& { return c.pretrain.batch_size; }, 1),
        size_entry("pretrain_warmup", "linear warmup steps",
                   [](RunConfig& c) -> std::size_t& { return c.pretrain.warmup_steps; }),
        double_entry("pretrain_weight_decay", "pretraining decoupled weight decay",
                     [](RunConfig& c) -> double& { return c.pretrain.weight_decay; }, 0.0, 1.0),
        double_entry("pretrain_clip", "pretraining gradient norm limit",
                     [](RunConfig& c) -> double& { return c.pretrain.clip_norm; }, 0.0, kBig, true),
        double_entry("pretrain_heldout", "fraction of documents held out for evaluation",
                     [](RunConfig& c) -> double& { return c.pretrain.heldout_fraction; }, 0.0, 0.5),
        double_entry("bm25_k1", "BM25 term-frequency saturation", [](RunConfig& c) -> double& { return c.bm25.k1; },
                     0.0, 100.0),
        double_entry("bm25_b", "BM25 length normalization", [](RunConfig& c) -> double& { return c.bm25.b; }, 0.0,
                     1.0),
        size_entry("top_k", "passages retrieved per query", [](RunConfig& c) -> std::size_t& { return c.pipeline.top_k; },
                   1),
        size_entry("max_new_tokens", "generation budget",
                   [](RunConfig& c) -> std::size_t& { return c.pipeline.max_new_tokens; }, 1),
        size_entry("min_passage_tokens", "passages shorter than this are not used for adaptation",
                   [](RunConfig& c) -> std::size_t& { return c.pipeline.min_passage_tokens; }),
        double_entry("lr", "test-time learning rate",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.learning_rate; }, 0.0, 10.0),
        size_entry("accumulation_steps", "pairs per optimizer update",
                   [](RunConfig& c) -> std::size_t& { return c.pipeline.adaptation.accumulation_steps; }, 1),
        size_entry("pair_budget", "maximum adaptation pairs per query",
                   [](RunConfig& c) -> std::size_t& { return c.pipeline.adaptation.pair_budget; }),
        double_entry("clip_norm", "gradient norm limit ('none' disables clipping)",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.clip_norm; }, 0.0, kBig, true),
        double_entry("beta1", "AdamW first-moment decay",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.beta1; }, 0.0, 0.999999),
        double_entry("beta2", "AdamW second-moment decay",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.beta2; }, 0.0, 0.999999),
        double_entry("epsilon", "AdamW denominator epsilon",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.epsilon; }, 1e-300, 1.0),
        double_entry("weight_decay", "decoupled weight decay",
                     [](RunConfig& c) -> double& { return c.pipeline.adaptation.weight_decay; }, 0.0, 1.0),
        {{"optimizer", "adamw | plain-sgd"},
         [](RunConfig& c, std::string_view v) {
             const auto t = trim(v);
             if (t == "adamw") {
                 c.pipeline.adaptation.optimizer = OptimizerKind::adamw;
             } else if (t == "plain-sgd" || t == "sgd") {
                 c.pipeline.adaptation.optimizer = OptimizerKind::plain_sgd;
             } else {
                 throw ConfigError("config: optimizer expects adamw or plain-sgd, got '" + t + "'");
             }
         },
         [](const RunConfig& c) {
             return std::string(c.pipeline.adaptation.optimizer == OptimizerKind::adamw ? "adamw" : "plain-sgd");
         }},
        {{"judge", "exact | token-f1 | remote"},
         [](RunConfig& c, std::string_view v) {
             try {
                 c.judge = parse_judge_kind(trim(v));
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("config: judge: ") + e.what());
             }
         },
         [](const RunConfig& c) { return std::string(to_string(c.judge)); }},
        string_entry("judge_url", "remote judge endpoint, http://host:port/path", &RunConfig::judge_url),
        size_entry("domains", "benchmark domains (the last is held out)",
                   [](RunConfig& c) -> std::size_t& { return c.bench.domains; }, 2),
        size_entry("facts_per_domain", "benchmark facts per domain",
                   [](RunConfig& c) -> std::size_t& { return c.bench.facts_per_domain; }, 1),
        size_entry("queries_per_domain", "benchmark questions on the held-out domain",
                   [](RunConfig& c) -> std::size_t& { return c.bench.queries_per_domain; }, 1),
        size_entry("attributes_per_domain", "benchmark attributes per domain",
                   [](RunConfig& c) -> std::size_t& { return c.bench.attributes_per_domain; }, 1),
        size_entry("context_passages", "passages shown in pretraining QA documents",
                   [](RunConfig& c) -> std::size_t& { return c.bench.context_passages; }, 1),
        {{"axis", "sweep axis: lr | pairs"},
         [](RunConfig& c, std::string_view v) {
             try {
                 c.axis = parse_sweep_axis(trim(v));
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("config: axis: ") + e.what());
             }
         },
         [](const RunConfig& c) { return std::string(to_string(c.axis)); }},
        {{"grid", "comma-separated sweep values (empty: axis default)"},
         [](RunConfig& c, std::string_view v) {
             c.grid.clear();
             for (const auto& item : split_list(v)) c.grid.push_back(parse_double("grid", item));
         },
         [](const RunConfig& c) {
             std::vector<std::string> items;
             for (double g : c.grid) items.push_back(format_double(g));
             return join(items);
         }},
    };
    return table;
}

const Entry* find_entry(std::string_view key) {
    for (const auto& e : entries()) {
        if (key == e.key.name) return &e;
    }
    return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& e : entries()) k.push_back(e.key);
        return k;
    }();
    return keys;
}

std::string valid_keys_message() {
    std::string out = "valid keys:";
    for (const auto& k : config_keys()) {
        out += ' ';
        out += k.name;
    }
    return out;
}

void RunConfig::set(std::string_view key, std::string_view value) {
    const Entry* e = find_entry(trim(key));
    if (!e) throw ConfigError("config: unknown key '" + trim(key) + "'; " + valid_keys_message());
    e->set(*this, value);
}

std::string RunConfig::get(std::string_view key) const {
    const Entry* e = find_entry(trim(key));
    if (!e) throw ConfigError("config: unknown key '" + trim(key) + "'; " + valid_keys_message());
    return e->get(*this);
}

void RunConfig::apply_text(std::string_view text, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(std::string(origin) + " line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& err) {
            throw ConfigError(std::string(origin) + " line " + std::to_string(line_no) + ": " + err.what());
        }
    }
}

void RunConfig::load_file(const std::filesystem::path& path) { apply_text(read_text(path), path.string()); }

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& e : entries()) {
        out += e.key.name;
        out += " = ";
        out += e.get(*this);
        out += '\n';
    }
    return out;
}

std::vector<double> RunConfig::effective_grid() const {
    if (!grid.empty()) return grid;
    if (axis == SweepAxis::learning_rate) return {1e-6, 5e-6, 1e-5, 5e-5, 1e-4};
    return {1, 2, 3, 4, 5};
}

}  // namespace ttarag
