// Run manifest: records the exact configuration, a stable hash of it, tool
// version and wall time.  This is the only output that may contain a
// timestamp, so data payloads stay byte-identical across reruns.

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace starmin {

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(const std::string& data);

// config must already be serialized canonically (sorted keys)
nlohmann::json make_manifest(const std::string& subcommand, const nlohmann::json& config,
                             double wall_time_sec);

}  // namespace starmin
