#include "manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/evp.h>

#include "storagessm/errors.hpp"

#ifndef STORAGESSM_VERSION
#define STORAGESSM_VERSION "unknown"
#endif

namespace storagessm::app {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> md(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!md || EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest initialisation failed");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(md.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

fs::path RunContext::output(const std::string& name) {
  if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
  return out_ / name;
}

nlohmann::json build_manifest(const RunConfig& config, const RunContext& ctx) {
  nlohmann::json m;
  m["tool"] = "storagessm-cli";
  m["command"] = config.command;
  m["seed"] = config.seed;
  m["config"] = to_json(config);
  m["versions"] = {
      {"storagessm", STORAGESSM_VERSION},
      {"compiler", __VERSION__},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"boost", BOOST_LIB_VERSION},
  };
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [role, path] : ctx.inputs())
    inputs[role] = {{"path", path}, {"sha256", sha256_file(path)}};
  m["inputs"] = inputs;
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& name : ctx.outputs()) outputs[name] = sha256_file(ctx.out() / name);
  m["outputs"] = outputs;
  return m;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

void write_manifest(const RunConfig& config, const RunContext& ctx) {
  write_json(ctx.out() / kManifestName, build_manifest(config, ctx));
}

nlohmann::json read_manifest(const fs::path& run_dir) {
  const auto path = run_dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw DataError("no manifest in " + run_dir.string(), 0);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what(), 0);
  }
}

void begin_run(const fs::path& out) {
  fs::create_directories(out);
  fs::remove(out / kManifestName);
  fs::remove(out / kIncompleteName);
}

void mark_incomplete(const fs::path& out, const std::string& stage, const std::string& message) {
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream marker(out / kIncompleteName);
  marker << "stage: " << stage << "\nerror: " << message << '\n';
}

}  // namespace storagessm::app
