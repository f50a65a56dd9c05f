#pragma once

// Command-line pipeline: synth, twin, plan, simulate, report.
// Exit codes: 0 ok, 2 input error, 3 empty result, 4 runtime failure.

#include "phytotwin/capture.hpp"
#include "phytotwin/error.hpp"
#include "phytotwin/generator.hpp"
#include "phytotwin/inspect.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phytotwin::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kEmptyResult = 3, kRuntimeError = 4 };

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::string plant_id = "plant";
  capture::TurntableModel turntable;
  inspect::InspectionConfig inspection;
  sim::SimSettings sim;
  sim::PlantSpec plant;
  double pose_error_mm = 5.0;
  double pose_error_deg = 2.0;
};

/// Flat key=value lines; '#' starts a comment. Unknown keys and malformed
/// values throw InvalidConfig naming the line.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {});
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

/// "a..b" leaf-count range. Throws InvalidSpec.
std::pair<int, int> parse_range(std::string_view text);

/// Timestamp for annotations: SOURCE_DATE_EPOCH when set, else the epoch.
std::string build_timestamp();

int exit_code_for(ErrorCode code);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phytotwin::cli
