#pragma once

#include "mcdn/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace mcdn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON training configuration. Every key is optional; unknown keys are errors.
///   {"seed": 1,
///    "dataDir": "...", "outDir": "...",
///    "train": {"learningRate", "momentumCoeff", "batchSize", "iterationCount",
///              "svmRegularization", "classWeighting", "trainAblations"},
///    "augment": {"intensityFactors": [..], "shiftOffsetsPx": [[dx,dy], ..],
///                "intensityEnabled", "shiftEnabled"},
///    "globalStream" / "localStream": {"inputSidePx", "featureDim",
///                                     "convUnits": [[out, kernel, stride], ..]}}
struct RunConfig {
  std::optional<std::filesystem::path> dataDir;
  std::optional<std::filesystem::path> outDir;
  PipelineConfig pipeline;
  std::uint64_t seed = 1;

  void validate() const;
};

RunConfig run_config_from_json(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Tiny two-stream model for finite-difference checking.
///   {"inputSidePx": 16, "convUnits": [[4,3,2],[4,3,1]], "featureDim": 6,
///    "batch": 4, "seed": 3, "step": 1e-5, "tolerance": 1e-4, "corruptParameter": ""}
struct GradcheckConfig {
  StreamConfig stream{16, {{4, 3, 2}, {4, 3, 1}}, 6};
  Index batch = 4;
  std::uint64_t seed = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::string corruptParameter;

  void validate() const;
};

GradcheckConfig gradcheck_config_from_json(const std::string& text, const std::string& source = "<config>");

}  // namespace mcdn
