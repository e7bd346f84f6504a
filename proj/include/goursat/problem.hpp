#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "goursat/errors.hpp"

namespace goursat {

using Json = nlohmann::ordered_json;

// What a command produces. The report's "timings" member is the only part that
// varies between identical runs.
struct CommandOutput {
  Json report;
  std::optional<std::string> surface_csv;  // solve
  std::optional<Json> jets;                // jet
};

// Commands: analyze, reconstruct, solve, jet. Throws Error (SchemaError for bad files).
CommandOutput run_command(const std::string& command, const Json& problem);

Json error_object(const Error& e);

// Process exit status for an error: 2 usage/schema, 4 I/O, 3 everything else.
int exit_code_for(ErrorCode code);

}  // namespace goursat
