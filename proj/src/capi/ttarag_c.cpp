#include "ttarag/ttarag.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "eval/judge.hpp"
#include "harness/commands.hpp"
#include "harness/config.hpp"
#include "lm/checkpoint.hpp"
#include "lm/pretrain.hpp"
#include "pipeline/pipeline.hpp"
#include "retrieval/corpus.hpp"

struct ttarag_config {
    ttarag::RunConfig cfg;
};

struct ttarag_model {
    ttarag::Checkpoint ckpt;
    ttarag::TransformerLm lm;
};

struct ttarag_index {
    ttarag::Bm25Index index;
};

struct ttarag_engine {
    ttarag_model* model;
    ttarag::Pipeline pipeline;
    std::size_t counter = 0;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_summary;

ttarag_status fail(ttarag_status s, std::string msg) {
    g_last_error = std::move(msg);
    return s;
}

/// Runs `fn`, mapping exceptions to status codes.
template <class F>
ttarag_status guarded(F&& fn) {
    try {
        g_last_error.clear();
        fn();
        return TTARAG_OK;
    } catch (const ttarag::ConfigError& e) {
        return fail(TTARAG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const ttarag::IoError& e) {
        return fail(TTARAG_ERR_IO, e.what());
    } catch (const ttarag::CheckpointError& e) {
        return fail(TTARAG_ERR_PARSE, e.what());
    } catch (const ttarag::DuplicateIdError& e) {
        return fail(TTARAG_ERR_PARSE, e.what());
    } catch (const ttarag::ContextLengthError& e) {
        return fail(TTARAG_ERR_CONTEXT_LENGTH, e.what());
    } catch (const ttarag::NumericError& e) {
        return fail(TTARAG_ERR_NUMERIC, e.what());
    } catch (const ttarag::JudgeError& e) {
        return fail(TTARAG_ERR_REMOTE, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(TTARAG_ERR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(TTARAG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(TTARAG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(TTARAG_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(TTARAG_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(TTARAG_ERR_INTERNAL, "unknown error");
    }
}

ttarag_status copy_out(const std::string& text, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (!buf || cap < text.size() + 1) {
        return fail(TTARAG_ERR_BUFFER_TOO_SMALL,
                    "buffer of " + std::to_string(cap) + " bytes, need " + std::to_string(text.size() + 1));
    }
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return TTARAG_OK;
}

#define REQUIRE(ptr)                                                                     \
    do {                                                                                 \
        if (!(ptr)) return fail(TTARAG_ERR_INVALID_ARGUMENT, #ptr " must not be NULL"); \
    } while (0)

template <class Cmd>
ttarag_status run_command(const ttarag_config* config, Cmd cmd) {
    REQUIRE(config);
    g_last_summary.clear();
    return guarded([&] { g_last_summary = cmd(config->cfg); });
}

}  // namespace

extern "C" {

const char* ttarag_status_name(ttarag_status status) {
    switch (status) {
        case TTARAG_OK: return "ok";
        case TTARAG_ERR_INVALID_ARGUMENT: return "invalid argument";
        case TTARAG_ERR_IO: return "i/o error";
        case TTARAG_ERR_PARSE: return "parse error";
        case TTARAG_ERR_CONTEXT_LENGTH: return "context length exceeded";
        case TTARAG_ERR_NUMERIC: return "numeric error";
        case TTARAG_ERR_REMOTE: return "remote judge error";
        case TTARAG_ERR_BUFFER_TOO_SMALL: return "buffer too small";
        case TTARAG_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* ttarag_last_error(void) { return g_last_error.c_str(); }
const char* ttarag_last_summary(void) { return g_last_summary.c_str(); }
const char* ttarag_version(void) { return "0.1.0"; }

ttarag_status ttarag_config_new(ttarag_config** out) {
    REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new ttarag_config{}; });
}

void ttarag_config_free(ttarag_config* config) { delete config; }

ttarag_status ttarag_config_set(ttarag_config* config, const char* key, const char* value) {
    REQUIRE(config);
    REQUIRE(key);
    REQUIRE(value);
    return guarded([&] { config->cfg.set(key, value); });
}

ttarag_status ttarag_config_load_file(ttarag_config* config, const char* path) {
    REQUIRE(config);
    REQUIRE(path);
    return guarded([&] { config->cfg.load_file(path); });
}

ttarag_status ttarag_config_get(const ttarag_config* config, const char* key, char* buf, size_t cap,
                                size_t* needed) {
    REQUIRE(config);
    REQUIRE(key);
    std::string value;
    if (auto s = guarded([&] { value = config->cfg.get(key); }); s != TTARAG_OK) return s;
    return copy_out(value, buf, cap, needed);
}

ttarag_status ttarag_config_dump(const ttarag_config* config, char* buf, size_t cap, size_t* needed) {
    REQUIRE(config);
    std::string text;
    if (auto s = guarded([&] { text = config->cfg.dump(); }); s != TTARAG_OK) return s;
    return copy_out(text, buf, cap, needed);
}

size_t ttarag_config_key_count(void) { return ttarag::config_keys().size(); }

const char* ttarag_config_key_name(size_t index) {
    const auto& keys = ttarag::config_keys();
    return index < keys.size() ? keys[index].name : nullptr;
}

const char* ttarag_config_key_help(size_t index) {
    const auto& keys = ttarag::config_keys();
    return index < keys.size() ? keys[index].help : nullptr;
}

ttarag_status ttarag_cmd_gen_bench(const ttarag_config* c) { return run_command(c, ttarag::cmd_gen_bench); }
ttarag_status ttarag_cmd_pretrain(const ttarag_config* c) { return run_command(c, ttarag::cmd_pretrain); }
ttarag_status ttarag_cmd_index(const ttarag_config* c) { return run_command(c, ttarag::cmd_index); }
ttarag_status ttarag_cmd_run(const ttarag_config* c) { return run_command(c, ttarag::cmd_run); }
ttarag_status ttarag_cmd_sweep(const ttarag_config* c) { return run_command(c, ttarag::cmd_sweep); }
ttarag_status ttarag_cmd_ablate(const ttarag_config* c) { return run_command(c, ttarag::cmd_ablate); }
ttarag_status ttarag_cmd_report(const ttarag_config* c) { return run_command(c, ttarag::cmd_report); }

ttarag_status ttarag_model_load(const char* checkpoint_path, ttarag_model** out) {
    REQUIRE(checkpoint_path);
    REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        if (!std::filesystem::exists(checkpoint_path)) {
            throw ttarag::IoError(std::string("checkpoint '") + checkpoint_path + "' not found");
        }
        auto ckpt = ttarag::load_checkpoint(checkpoint_path);
        auto lm = ttarag::instantiate(ckpt);
        *out = new ttarag_model{std::move(ckpt), std::move(lm)};
    });
}

void ttarag_model_free(ttarag_model* model) { delete model; }

ttarag_status ttarag_model_get_info(const ttarag_model* model, ttarag_model_info* info) {
    REQUIRE(model);
    REQUIRE(info);
    const auto& c = model->ckpt.config;
    info->vocab_size = c.vocab_size;
    info->embed_dim = c.embed_dim;
    info->layers = c.layers;
    info->heads = c.heads;
    info->context = c.context;
    info->parameters = model->lm.parameter_count();
    return TTARAG_OK;
}

ttarag_status ttarag_index_load(const char* corpus_path, ttarag_index** out, size_t* malformed_lines) {
    REQUIRE(corpus_path);
    REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        auto corpus = ttarag::read_corpus(corpus_path);
        if (malformed_lines) *malformed_lines = corpus.malformed.size();
        *out = new ttarag_index{ttarag::Bm25Index(std::move(corpus.documents))};
    });
}

void ttarag_index_free(ttarag_index* index) { delete index; }

size_t ttarag_index_size(const ttarag_index* index) { return index ? index->index.size() : 0; }

ttarag_status ttarag_index_search(const ttarag_index* index, const char* query, size_t k, ttarag_hit* hits,
                                  size_t cap, size_t* count) {
    REQUIRE(index);
    REQUIRE(query);
    REQUIRE(count);
    if (cap > 0) REQUIRE(hits);
    *count = 0;
    return guarded([&] {
        const auto found = index->index.retrieve(query, k);
        const std::size_t n = std::min(found.size(), cap);
        for (std::size_t i = 0; i < n; ++i) {
            hits[i].id = index->index.document(found[i].doc).id.c_str();
            hits[i].score = found[i].score;
        }
        *count = n;
    });
}

ttarag_status ttarag_engine_new(ttarag_model* model, const ttarag_index* index, const ttarag_config* config,
                                ttarag_engine** out) {
    REQUIRE(model);
    REQUIRE(index);
    REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        const ttarag::PipelineConfig pc = config ? config->cfg.pipeline : ttarag::PipelineConfig{};
        *out = new ttarag_engine{model, ttarag::Pipeline(index->index, model->ckpt.vocab, model->lm, pc)};
    });
}

void ttarag_engine_free(ttarag_engine* engine) { delete engine; }

ttarag_status ttarag_engine_answer(ttarag_engine* engine, const char* question, ttarag_mode mode, char* buf,
                                   size_t cap, size_t* needed, int* fallback) {
    REQUIRE(engine);
    REQUIRE(question);
    ttarag::AnswerMode m;
    switch (mode) {
        case TTARAG_MODE_NAIVE: m = ttarag::AnswerMode::naive; break;
        case TTARAG_MODE_TTARAG: m = ttarag::AnswerMode::ttarag; break;
        case TTARAG_MODE_WOSEG: m = ttarag::AnswerMode::woseg; break;
        default: return fail(TTARAG_ERR_INVALID_ARGUMENT, "unknown answer mode " + std::to_string(int(mode)));
    }
    std::string text;
    bool fb = false;
    auto s = guarded([&] {
        ttarag::QueryRecord q;
        q.id = "q" + std::to_string(engine->counter++);
        q.question = question;
        const auto a = engine->pipeline.answer(q, m);
        text = a.text;
        fb = a.fallback;
    });
    if (s != TTARAG_OK) return s;
    if (fallback) *fallback = fb ? 1 : 0;
    return copy_out(text, buf, cap, needed);
}

}  // extern "C"
