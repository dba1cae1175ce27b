#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "tvs/config.h"

namespace tvs {

// Every command reads its inputs from the resolved config, writes its outputs
// under run.out and records them in run.out/manifest. Outputs carry no
// timestamps, so a fixed seed reproduces them byte for byte.
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_order(const RunConfig& config, std::ostream& log);
void cmd_retrieve(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_retrieve_order(const RunConfig& config, std::ostream& log);
void cmd_sweep(const RunConfig& config, std::ostream& log);
void cmd_stats(const RunConfig& config, std::ostream& log);

const std::vector<std::string>& command_names();
void run_command(const std::string& name, const RunConfig& config, std::ostream& log);

// 64-bit FNV-1a over a file's bytes, as 16 hex digits.
std::string fnv1a_file(const std::filesystem::path& path);

// Stream of independent seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream);

struct SweepRow {
  std::string label;
  int code_dim = 0;
  int size = 0;
  std::string variant;
  double lambda = 1.0;
  double overall = 0.0;
  double short_bucket = 0.0;
  double long_bucket = 0.0;
};

// The (dim, size, variant, lambda) rows a grid expands to.
std::vector<SweepRow> sweep_grid(const std::string& name);

}  // namespace tvs
