#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "run_config.hpp"

namespace storagessm::app {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Bookkeeping for one run: where outputs go, which files were written, and
// which stage is running (named in error reports).
class RunContext {
 public:
  explicit RunContext(std::filesystem::path out) : out_(std::move(out)) {}

  const std::filesystem::path& out() const { return out_; }
  // Path of an output file; recorded for the manifest.
  std::filesystem::path output(const std::string& name);
  void stage(std::string name) { stage_ = std::move(name); }
  const std::string& stage() const { return stage_; }
  const std::map<std::string, std::string>& inputs() const { return inputs_; }
  void add_input(const std::string& role, const std::string& path) { inputs_[role] = path; }
  const std::vector<std::string>& outputs() const { return outputs_; }

 private:
  std::filesystem::path out_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> inputs_;
  std::string stage_ = "setup";
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kIncompleteName = "INCOMPLETE";

// Full configuration, versions, and SHA-256 of every input and output.
nlohmann::json build_manifest(const RunConfig& config, const RunContext& ctx);
void write_manifest(const RunConfig& config, const RunContext& ctx);
nlohmann::json read_manifest(const std::filesystem::path& run_dir);

// Removes a stale manifest and marker so a failed run never looks complete.
void begin_run(const std::filesystem::path& out);
void mark_incomplete(const std::filesystem::path& out, const std::string& stage,
                     const std::string& message);

// Writes JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace storagessm::app
