#include "run_support.hpp"

#include <algorithm>
#include <sstream>

#include "nda/error.hpp"
#include "nda/io.hpp"

#ifndef NDA_VERSION
#define NDA_VERSION "0.0.0-unknown"
#endif

namespace nda::cli {

namespace {

bool flag_present(const std::vector<std::string> &args, const std::string &flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string &a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar_text(const nlohmann::json &v, const std::string &key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  throw UsageError("config key '" + key + "' must be a string, number, boolean or list");
}

} // namespace

std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception &e) {
    throw UsageError("--config " + path + ": " + e.what());
  } catch (const IoError &e) {
    throw UsageError(std::string("--config: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("--config " + path + ": top level must be an object");
  if (!cfg.contains("schemaVersion") || cfg["schemaVersion"] != 1) {
    throw UsageError("--config " + path + ": schemaVersion must be 1");
  }
  if (cfg.contains("subcommand")) {
    const auto sub = cfg["subcommand"].get<std::string>();
    if (args.empty() || args.front() != sub) {
      throw UsageError("--config " + path + " is for subcommand '" + sub + "'");
    }
  }
  for (const auto &[key, value] : cfg.items()) {
    if (key == "schemaVersion" || key == "subcommand") continue;
    const std::string flag = "--" + key;
    if (flag_present(args, flag)) continue;  // the command line wins
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    if (value.is_null()) continue;
    std::string text;
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + scalar_text(value[i], key);
    } else {
      text = scalar_text(value, key);
    }
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string &text, const char *flag) {
  std::vector<double> out;
  for (const auto &item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != item.size()) throw UsageError(std::string(flag) + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::vector<int> parse_ints(const std::string &text, const char *flag) {
  std::vector<int> out;
  for (double v : parse_doubles(text, flag)) {
    if (v != static_cast<double>(static_cast<int>(v))) {
      throw UsageError(std::string(flag) + ": expected integers");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
  std::vector<std::uint64_t> out;
  for (const auto &item : split_list(text)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') throw UsageError("--seeds: '" + item + "' is not a seed");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--seeds: empty list");
  return out;
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
}

void OutputSet::write(const std::string &name, std::string_view contents) {
  write_file_atomic(dir_ / name, contents);
  artifacts_.push_back({{"path", name}, {"bytes", contents.size()}, {"fnv1a64", checksum_hex(contents)}});
}

void OutputSet::write(const std::string &name, const std::vector<std::uint8_t> &bytes) {
  write(name, std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
}

void OutputSet::write_json(const std::string &name, const nlohmann::ordered_json &value) {
  write(name, dump_json(value));
}

void OutputSet::write_manifest(const nlohmann::ordered_json &config, double wall_seconds,
                               const std::string &manifest_name) const {
  nlohmann::ordered_json m;
  m["tool"] = "nda";
  m["version"] = version_string();
  m["config"] = config;
  m["wallTimeSeconds"] = wall_seconds;
  m["artifacts"] = artifacts_;
  write_file_atomic(dir_ / manifest_name, dump_json(m));
}

bool run_is_current(const std::filesystem::path &dir, const nlohmann::ordered_json &config,
                    const std::string &manifest_name) {
  const auto path = dir / manifest_name;
  if (!std::filesystem::exists(path)) return false;
  try {
    const auto m = nlohmann::ordered_json::parse(read_file_text(path));
    if (m.at("config") != config) return false;
    for (const auto &a : m.at("artifacts")) {
      const auto bytes = read_file_text(dir / a.at("path").get<std::string>());
      if (checksum_hex(bytes) != a.at("fnv1a64").get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception &) {
    return false;
  }
}

std::string version_string() { return NDA_VERSION; }

std::string dump_json(const nlohmann::ordered_json &value) { return value.dump(2) + "\n"; }

} // namespace nda::cli
