#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace nda::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitExpectation = 3;

/// Thrown for bad flag values found after parsing; maps to exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Splices a "--config file.json" into argv: every key of the file not given on the
/// command line becomes "--key value". Requires "schemaVersion": 1.
std::vector<std::string> merge_config_file(std::vector<std::string> args);

std::vector<std::string> split_list(const std::string &text);
std::vector<double> parse_doubles(const std::string &text, const char *flag);
std::vector<int> parse_ints(const std::string &text, const char *flag);
std::vector<std::uint64_t> parse_seeds(const std::string &text);

/// Files written into one output directory, each atomically, with checksums
/// collected for the manifest.
class OutputSet {
public:
  explicit OutputSet(std::filesystem::path dir);

  void write(const std::string &name, std::string_view contents);
  void write(const std::string &name, const std::vector<std::uint8_t> &bytes);
  void write_json(const std::string &name, const nlohmann::ordered_json &value);

  /// manifest.json: config, version, wall time, artifact checksums. The manifest
  /// itself is not an artifact, so reruns compare equal on everything else.
  void write_manifest(const nlohmann::ordered_json &config, double wall_seconds,
                      const std::string &manifest_name = "manifest.json") const;

  const std::filesystem::path &dir() const noexcept { return dir_; }
  const nlohmann::ordered_json &artifacts() const noexcept { return artifacts_; }

private:
  std::filesystem::path dir_;
  nlohmann::ordered_json artifacts_ = nlohmann::ordered_json::array();
};

/// True when dir/manifest.json was written for the same config and every listed
/// artifact still matches its checksum.
bool run_is_current(const std::filesystem::path &dir, const nlohmann::ordered_json &config,
                    const std::string &manifest_name = "manifest.json");

std::string version_string();

/// Deterministic JSON text: two-space indent, trailing newline.
std::string dump_json(const nlohmann::ordered_json &value);

} // namespace nda::cli
