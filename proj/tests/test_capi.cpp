#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "lm/checkpoint.hpp"
#include "ttarag/ttarag.h"

namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

struct Paths {
    fs::path dir, corpus, ckpt;
};

const Paths& fixture_files() {
    static const Paths p = [] {
        Paths p;
        p.dir = fs::temp_directory_path() / "ttarag_capi_test";
        fs::create_directories(p.dir);
        p.corpus = p.dir / "corpus.jsonl";
        std::ofstream out(p.corpus);
        for (const auto& d : ts::tiny_corpus()) {
            out << "{\"id\":\"" << d.id << "\",\"domain\":\"toy\",\"text\":\"" << d.text << "\"}\n";
        }
        out << "{broken\n";
        out.close();
        auto vocab = ts::tiny_vocab();
        const auto cfg = ts::tiny_config(vocab.size());
        ttarag::TransformerLm m(cfg);
        p.ckpt = p.dir / "tiny.ckpt";
        ttarag::save_checkpoint(p.ckpt, {cfg, vocab, m.snapshot()});
        return p;
    }();
    return p;
}

std::string run_cli(const std::string& args, int* code) {
    const fs::path out = fs::temp_directory_path() / "ttarag_cli_stdout.txt";
    const fs::path err = fs::temp_directory_path() / "ttarag_cli_stderr.txt";
    const std::string cmd = std::string(TTARAG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    *code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream e(err);
    return std::string(std::istreambuf_iterator<char>(e), {});
}

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
    EXPECT_STREQ(ttarag_status_name(TTARAG_OK), "ok");
    EXPECT_STREQ(ttarag_status_name(TTARAG_ERR_IO), "i/o error");
    EXPECT_GT(std::string(ttarag_version()).size(), 0u);
}

TEST(CApi, ConfigRoundTripAndErrors) {
    ttarag_config* c = nullptr;
    ASSERT_EQ(ttarag_config_new(&c), TTARAG_OK);
    EXPECT_EQ(ttarag_config_set(c, "pair_budget", "4"), TTARAG_OK);
    char buf[64];
    size_t needed = 0;
    ASSERT_EQ(ttarag_config_get(c, "pair_budget", buf, sizeof buf, &needed), TTARAG_OK);
    EXPECT_STREQ(buf, "4");
    EXPECT_EQ(needed, 2u);
    EXPECT_EQ(ttarag_config_get(c, "pair_budget", buf, 1, &needed), TTARAG_ERR_BUFFER_TOO_SMALL);

    EXPECT_EQ(ttarag_config_set(c, "nonsense", "1"), TTARAG_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(ttarag_last_error()).find("valid keys"), std::string::npos);
    EXPECT_EQ(ttarag_config_set(c, "lr", "abc"), TTARAG_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(ttarag_config_set(nullptr, "lr", "1"), TTARAG_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(ttarag_config_load_file(c, "/nonexistent/cfg"), TTARAG_ERR_IO);

    ASSERT_EQ(ttarag_config_dump(c, nullptr, 0, &needed), TTARAG_ERR_BUFFER_TOO_SMALL);
    std::string dump(needed, '\0');
    ASSERT_EQ(ttarag_config_dump(c, dump.data(), dump.size(), &needed), TTARAG_OK);
    EXPECT_NE(dump.find("pair_budget = 4"), std::string::npos);

    EXPECT_GT(ttarag_config_key_count(), 10u);
    EXPECT_STREQ(ttarag_config_key_name(0), "out");
    EXPECT_EQ(ttarag_config_key_name(ttarag_config_key_count()), nullptr);
    ttarag_config_free(c);
    ttarag_config_free(nullptr);
}

TEST(CApi, IndexSearch) {
    ttarag_index* idx = nullptr;
    size_t malformed = 0;
    ASSERT_EQ(ttarag_index_load(fixture_files().corpus.c_str(), &idx, &malformed), TTARAG_OK);
    EXPECT_EQ(malformed, 1u);
    EXPECT_EQ(ttarag_index_size(idx), 6u);
    ttarag_hit hits[3];
    size_t count = 0;
    ASSERT_EQ(ttarag_index_search(idx, "color of apple", 3, hits, 3, &count), TTARAG_OK);
    ASSERT_EQ(count, 3u);
    EXPECT_STREQ(hits[0].id, "d0");
    EXPECT_GE(hits[0].score, hits[1].score);
    EXPECT_EQ(ttarag_index_search(idx, "apple", 0, hits, 3, &count), TTARAG_ERR_INVALID_ARGUMENT);
    ttarag_index_free(idx);
    EXPECT_EQ(ttarag_index_load("/nonexistent.jsonl", &idx, nullptr), TTARAG_ERR_IO);
    EXPECT_EQ(idx, nullptr);
}

TEST(CApi, ModelAndEngine) {
    ttarag_model* m = nullptr;
    ASSERT_EQ(ttarag_model_load(fixture_files().ckpt.c_str(), &m), TTARAG_OK);
    ttarag_model_info info{};
    ASSERT_EQ(ttarag_model_get_info(m, &info), TTARAG_OK);
    EXPECT_EQ(info.embed_dim, 8u);
    EXPECT_EQ(info.vocab_size, ts::tiny_vocab().size());

    ttarag_index* idx = nullptr;
    ASSERT_EQ(ttarag_index_load(fixture_files().corpus.c_str(), &idx, nullptr), TTARAG_OK);
    ttarag_config* c = nullptr;
    ttarag_config_new(&c);
    ttarag_config_set(c, "max_new_tokens", "3");
    ttarag_config_set(c, "lr", "0.01");
    ttarag_engine* e = nullptr;
    ASSERT_EQ(ttarag_engine_new(m, idx, c, &e), TTARAG_OK);

    char naive[256], adapted[256], again[256];
    size_t needed = 0;
    int fallback = -1;
    ASSERT_EQ(ttarag_engine_answer(e, "what is the color of apple?", TTARAG_MODE_NAIVE, naive, sizeof naive, &needed,
                                   &fallback),
              TTARAG_OK);
    EXPECT_EQ(fallback, 0);
    ASSERT_EQ(ttarag_engine_answer(e, "what is the color of apple?", TTARAG_MODE_TTARAG, adapted, sizeof adapted,
                                   &needed, &fallback),
              TTARAG_OK);
    ASSERT_EQ(ttarag_engine_answer(e, "what is the color of apple?", TTARAG_MODE_NAIVE, again, sizeof again, &needed,
                                   nullptr),
              TTARAG_OK);
    EXPECT_STREQ(naive, again);
    EXPECT_EQ(ttarag_engine_answer(e, "q", static_cast<ttarag_mode>(9), naive, sizeof naive, &needed, nullptr),
              TTARAG_ERR_INVALID_ARGUMENT);

    ttarag_engine_free(e);
    ttarag_config_free(c);
    ttarag_index_free(idx);
    ttarag_model_free(m);
    EXPECT_EQ(ttarag_model_load("/nonexistent.ckpt", &m), TTARAG_ERR_IO);
    const auto junk = fixture_files().dir / "junk.ckpt";
    std::ofstream(junk) << "junk";
    EXPECT_EQ(ttarag_model_load(junk.c_str(), &m), TTARAG_ERR_PARSE);
}

TEST(CApi, CommandFailureSetsLastError) {
    ttarag_config* c = nullptr;
    ttarag_config_new(&c);
    ttarag_config_set(c, "out", (fixture_files().dir / "run").c_str());
    ttarag_config_set(c, "checkpoint", "/nonexistent.ckpt");
    EXPECT_EQ(ttarag_cmd_run(c), TTARAG_ERR_IO);
    EXPECT_NE(std::string(ttarag_last_error()).find("checkpoint"), std::string::npos);
    EXPECT_EQ(ttarag_cmd_run(nullptr), TTARAG_ERR_INVALID_ARGUMENT);
    ttarag_config_free(c);
}

TEST(Cli, UsageErrorsExitOne) {
    int code = 0;
    auto err = run_cli("", &code);
    EXPECT_EQ(code, 1);
    err = run_cli("run --no-such-flag 1", &code);
    EXPECT_EQ(code, 1);
    EXPECT_NE(err.find("ttarag:"), std::string::npos);

    const auto cfg = fixture_files().dir / "bad.cfg";
    std::ofstream(cfg) << "lr = 1e-5\nlearning_rate = 3\n";
    err = run_cli("run --config " + cfg.string(), &code);
    EXPECT_EQ(code, 1);
    EXPECT_NE(err.find("unknown key 'learning_rate'"), std::string::npos) << err;
    EXPECT_NE(err.find("valid keys"), std::string::npos);
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
}

TEST(Cli, RuntimeErrorsExitTwo) {
    int code = 0;
    const auto out = fixture_files().dir / "cli_run";
    const auto err = run_cli("run --out " + out.string() + " --checkpoint /nonexistent.ckpt", &code);
    EXPECT_EQ(code, 2);
    EXPECT_NE(err.find("not found"), std::string::npos) << err;
}

TEST(Cli, IndexCommandEchoesConfig) {
    int code = 0;
    const auto out = fixture_files().dir / "cli_index";
    const auto cfg = fixture_files().dir / "index.cfg";
    std::ofstream(cfg) << "bm25_k1 = 0.9\ntop_k = 2\n";
    run_cli("index --config " + cfg.string() + " --corpus " + fixture_files().corpus.string() + " --out " +
                out.string() + " --top-k 4",
            &code);
    EXPECT_EQ(code, 0);
    std::ifstream in(out / "config.txt");
    const std::string text(std::istreambuf_iterator<char>(in), {});
    EXPECT_NE(text.find("bm25_k1 = 0.9"), std::string::npos);
    EXPECT_NE(text.find("top_k = 4"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "index.json"));
}
