#include "starmin/manifest.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

namespace starmin {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

nlohmann::json make_manifest(const std::string& subcommand, const nlohmann::json& config,
                             double wall_time_sec) {
  nlohmann::json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
  m["config_hash"] = hash.str();
  m["version"] = kToolVersion;
  m["wall_time_sec"] = wall_time_sec;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ");
  m["generated_at"] = ts.str();
  return m;
}

}  // namespace starmin
