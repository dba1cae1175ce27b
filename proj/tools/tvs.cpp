#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tvs/commands.h"
#include "tvs/config.h"
#include "tvs/error.h"

namespace {

struct Flags {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> shortcuts;
};

// Flag name -> config key; every shortcut also works as --set key=value.
const std::vector<std::pair<std::string, std::string>> kShortcuts = {
    {"seed", "run.seed"},          {"out", "run.out"},
    {"workers", "run.workers"},    {"dataset", "data.dataset"},
    {"text-emb", "data.text_emb"}, {"frame-emb", "data.frame_emb"},
    {"strategy", "eval.strategy"}, {"beam-width", "eval.beam_width"},
    {"seg-limit", "eval.seg_limit"}, {"protocol", "eval.protocol"},
    {"pool-size", "eval.pool_size"}, {"k", "eval.k"},
    {"split", "eval.split"},       {"checkpoint", "eval.checkpoint"},
    {"grid", "sweep.grid"},        {"steps", "train.total_steps"},
    {"lambda", "train.lambda_vq"}, {"components", "train.components"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-storyboard ordering: synthesis, training, evaluation"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : tvs::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", flags.config_file, "key=value config file with [sections]");
    sub->add_option("--set", flags.sets, "override one key, e.g. --set train.total_steps=200");
    for (const auto& [flag, key] : kShortcuts) {
      sub->add_option_function<std::string>(
          "--" + flag, [&flags, key = key](const std::string& v) { flags.shortcuts[key] = v; }, "sets " + key);
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    tvs::RunConfig config;
    if (!flags.config_file.empty()) config.load_file(flags.config_file);
    tvs::ConfigMap overrides;
    std::string malformed;
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        malformed += "\n  " + s;
        continue;
      }
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!malformed.empty()) throw tvs::InvalidArgument("--set expects key=value:" + malformed);
    for (const auto& [k, v] : flags.shortcuts) overrides[k] = v;
    config.merge(overrides);
    tvs::run_command(command, config, std::cout);
  } catch (const tvs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
