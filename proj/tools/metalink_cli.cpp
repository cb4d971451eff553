// metalink command line: train, eval, sweep, selftest.
//
// Exit codes: 0 success, 1 other failure, 2 config or usage error,
// 3 numeric failure, 130 interrupted (partial outputs are written).

#include <csignal>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metalink/metalink.h"

namespace {

int exit_code(mtl_status s) {
  switch (s) {
    case MTL_OK: return 0;
    case MTL_ERR_CONFIG: return 2;
    case MTL_ERR_NUMERIC: return 3;
    case MTL_ERR_INTERRUPTED: return 130;
    default: return 1;
  }
}

int report(mtl_status s) {
  if (s != MTL_OK) std::fprintf(stderr, "metalink: %s\n", mtl_last_error());
  return exit_code(s);
}

extern "C" void on_sigint(int) { mtl_request_stop(); }

void print_log(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

void print_check(const mtl_check* c, void*) {
  std::printf("%s %s (%.1f s): %s\n", c->passed ? "PASS" : "FAIL", c->name, c->seconds, c->detail);
  std::fflush(stdout);
}

struct Options {
  std::string config;
  std::string out_dir = "out";
  std::optional<unsigned long long> seed;
  std::optional<unsigned> threads;
};

int run(const std::string& verb, const Options& opt) {
  if (verb == "selftest") {
    int failures = 0;
    const mtl_status s = mtl_selftest(opt.seed.value_or(1), print_check, nullptr, &failures);
    if (s != MTL_OK) return report(s);
    std::printf("%d of 6 checks failed\n", failures);
    return failures == 0 ? 0 : 1;
  }

  mtl_config* cfg = nullptr;
  mtl_status s = opt.config.empty() ? mtl_config_default(&cfg)
                                    : mtl_config_load(opt.config.c_str(), &cfg);
  if (s != MTL_OK) return report(s);
  if (opt.seed) s = mtl_config_set(cfg, "seed", std::to_string(*opt.seed).c_str());
  if (s == MTL_OK && opt.threads) {
    s = mtl_config_set(cfg, "threads", std::to_string(*opt.threads).c_str());
  }
  if (s == MTL_OK) {
    mtl_set_log(print_log, nullptr);
    std::signal(SIGINT, on_sigint);
    if (verb == "train") {
      s = mtl_train(cfg, opt.out_dir.c_str());
    } else if (verb == "eval") {
      s = mtl_eval(cfg, opt.out_dir.c_str());
    } else {
      s = mtl_sweep(cfg, opt.out_dir.c_str());
    }
    std::signal(SIGINT, SIG_DFL);
  }
  mtl_config_free(cfg);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned end-to-end links over fading channels"};
  app.set_version_flag("--version", std::string(mtl_version()) + " (" + mtl_git_describe() + ")");
  app.require_subcommand(1);

  Options opt;
  std::string verb;
  const struct {
    const char* name;
    const char* help;
  } verbs[] = {
      {"train", "train the configured schemes and write checkpoints"},
      {"eval", "evaluate checkpoints from a previous train in --out-dir"},
      {"sweep", "train and evaluate along the configured sweep axis"},
      {"selftest", "run the oracle suites"},
  };
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    if (std::string(v.name) != "selftest") {
      sub->add_option("--config", opt.config, "configuration file (key = value lines)")
          ->check(CLI::ExistingFile);
      sub->add_option("--out-dir", opt.out_dir, "output directory")->capture_default_str();
      sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    }
    sub->add_option("--seed", opt.seed, "base seed (overrides the config)");
    sub->callback([&verb, name = v.name] { verb = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run(verb, opt);
}
