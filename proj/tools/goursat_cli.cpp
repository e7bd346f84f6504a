#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "goursat/problem.hpp"

namespace fs = std::filesystem;
using goursat::Error;
using goursat::ErrorCode;
using goursat::Json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Json read_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what(),
                {{"byte", static_cast<double>(e.byte)}});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monge-Ampere and contact-geometry toolkit"};
  app.require_subcommand(1);
  std::string problem_path;
  std::string out_dir = ".";
  for (const char* name : {"analyze", "reconstruct", "solve", "jet"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("problem", problem_path, "problem file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  fs::path out(out_dir);
  Json report;
  int status = 0;
  try {
    fs::create_directories(out);
    Json problem = read_problem(problem_path);
    goursat::CommandOutput result = goursat::run_command(command, problem);
    if (result.surface_csv) write_file(out / "surface.csv", *result.surface_csv);
    if (result.jets) write_file(out / "jets.json", result.jets->dump(2) + "\n");
    report = std::move(result.report);
  } catch (const Error& e) {
    report = Json{{"command", command}, {"error", goursat::error_object(e)}};
    status = goursat::exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    report = Json{{"command", command}, {"error", {{"code", "IoError"}, {"message", e.what()}, {"details", Json::object()}}}};
    status = 4;
  } catch (const std::exception& e) {
    report = Json{{"command", command}, {"error", {{"code", "InternalError"}, {"message", e.what()}, {"details", Json::object()}}}};
    status = 3;
  }
  std::string text = report.dump(2) + "\n";
  try {
    write_file(out / "report.json", text);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    status = status ? status : 4;
  }
  if (status != 0) {
    std::cerr << report["error"].dump(2) << "\n";
  } else {
    std::cout << "wrote " << (out / "report.json").string() << "\n";
  }
  return status;
}
