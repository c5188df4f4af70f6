#pragma once

#include "cellpheno/config.hpp"

#include <string>

namespace cellpheno::pipeline {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage { Synth, Segment, Features, Prune, Embed, Cluster, Panel, Pipeline };

Stage parse_stage(const std::string& name);
const char* to_string(Stage s);

struct StageOptions {
  bool force = false;
};

/// Runs one stage (or the whole chain) against the artifacts directory named
/// by the config. Returns a process exit code: 0 success, 2 missing or
/// ill-formed inputs, 3 invariant violation.
int run_stage(Stage stage, const config::PipelineConfig& cfg, const StageOptions& opts = {});

}  // namespace cellpheno::pipeline
