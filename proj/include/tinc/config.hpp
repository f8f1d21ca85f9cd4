#pragma once

#include <string>
#include <vector>

#include "tinc/evaluate.hpp"
#include "tinc/pretrain.hpp"
#include "tinc/synthgen.hpp"

namespace tinc {

// One config file per run; sections map onto the module configs. Sections
// omit `seed` to inherit the global one.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: resolved from TINC_OUT_DIR, else "."
  SynthConfig synth;
  PretrainConfig pretrain;  // owns the sampler/augment/model/loss sections
  EvalConfig eval;
};

// Parses the file and applies key=value overrides ("pretrain.epochs=2",
// "loss.similarity_mode=tinc"). Unknown keys raise with the offending key.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});

std::string resolve_out_dir(const RunConfig& cfg, const std::string& flag_value);

}  // namespace tinc
