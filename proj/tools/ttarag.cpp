// Command-line driver over the C interface.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ttarag/ttarag.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int report_failure(ttarag_status s) {
    std::fprintf(stderr, "ttarag: %s\n", ttarag_last_error());
    return s == TTARAG_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

std::string flag_name(const char* key) {
    std::string s = key;
    for (char& c : s) {
        if (c == '_') c = '-';
    }
    return "--" + s;
}

struct Command {
    const char* name;
    const char* help;
    ttarag_status (*fn)(const ttarag_config*);
};

const Command kCommands[] = {
    {"gen-bench", "Generate the synthetic domain-shift benchmark", ttarag_cmd_gen_bench},
    {"pretrain", "Pretrain the generator on a corpus and write a checkpoint", ttarag_cmd_pretrain},
    {"index", "Build the BM25 index over a corpus and report its statistics", ttarag_cmd_index},
    {"run", "Answer a dataset in one mode (with a naive baseline) and report accuracy", ttarag_cmd_run},
    {"sweep", "Vary the learning rate or pair budget and tabulate accuracy and time", ttarag_cmd_sweep},
    {"ablate", "Compare naive, ttarag and whole-passage adaptation", ttarag_cmd_ablate},
    {"report", "Summarize existing run directories", ttarag_cmd_report},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval QA with test-time adaptation of the generator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ttarag_version()));

    std::string config_file;
    std::map<std::string, std::string> values;  // key -> flag value
    std::map<std::string, CLI::Option*> options;
    std::vector<std::pair<CLI::App*, const Command*>> subs;

    for (const Command& cmd : kCommands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_file, "key = value configuration file (flags override it)")
            ->check(CLI::ExistingFile);
        for (size_t i = 0; i < ttarag_config_key_count(); ++i) {
            const std::string key = ttarag_config_key_name(i);
            CLI::Option* opt = sub->add_option(flag_name(key.c_str()), values[key], ttarag_config_key_help(i));
            opt->type_name("VALUE");
            options[std::string(cmd.name) + "/" + key] = opt;
        }
        subs.emplace_back(sub, &cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "ttarag: %s\n", e.what());
        return kExitUsage;
    }

    ttarag_config* config = nullptr;
    if (ttarag_status s = ttarag_config_new(&config); s != TTARAG_OK) return report_failure(s);

    int code = 0;
    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) continue;
        ttarag_status s = TTARAG_OK;
        if (!config_file.empty()) s = ttarag_config_load_file(config, config_file.c_str());
        for (size_t i = 0; s == TTARAG_OK && i < ttarag_config_key_count(); ++i) {
            const std::string key = ttarag_config_key_name(i);
            if (options[std::string(cmd->name) + "/" + key]->count() == 0) continue;
            s = ttarag_config_set(config, key.c_str(), values[key].c_str());
        }
        if (s != TTARAG_OK) {
            code = report_failure(s);
            break;
        }
        s = cmd->fn(config);
        if (s != TTARAG_OK) {
            code = report_failure(s);
            break;
        }
        std::printf("%s\n", ttarag_last_summary());
    }
    ttarag_config_free(config);
    return code;
}
