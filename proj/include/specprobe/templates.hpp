#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "specprobe/util.hpp"

#ifndef SPECPROBE_ASSET_DIR
#define SPECPROBE_ASSET_DIR "."
#endif

namespace specprobe {

/// Root holding templates/ and config/. SPECPROBE_ASSETS overrides the
/// compiled-in location.
inline std::filesystem::path asset_root() {
  if (const char* env = std::getenv("SPECPROBE_ASSETS"); env && *env) return env;
  return SPECPROBE_ASSET_DIR;
}

struct PromptTemplate {
  std::string name;
  std::string version;
  std::string text;

  std::string id() const { return name + "." + version; }

  /// Replaces every {{key}} placeholder. Unknown placeholders are left as-is.
  std::string render(const std::map<std::string, std::string>& vars) const {
    std::string out = text;
    for (const auto& [k, v] : vars) out = replace_all(std::move(out), "{{" + k + "}}", v);
    return out;
  }
};

/// Versioned prompt assets addressed as <dir>/<name>.<version>.txt.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir = asset_root() / "templates") : dir_(std::move(dir)) {}

  PromptTemplate load(const std::string& name, const std::string& version = "v1") const {
    const auto path = dir_ / (name + "." + version + ".txt");
    if (!std::filesystem::exists(path))
      throw Error(ErrorKind::ConfigError, "missing prompt template " + path.string());
    return {name, version, read_file(path)};
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace specprobe
