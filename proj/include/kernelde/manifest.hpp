#pragma once
// Run manifests: every tool invocation drops a manifest.json next to its
// outputs recording the command line, resolved configuration, seed and the
// files written. `kernelde rerun` replays the stored command and must land on
// byte-identical CSV/JSON outputs; the timestamp lives only here so the data
// files stay reproducible.

#include <cstdint>
#include <string>
#include <vector>

namespace kernelde::manifest {

inline constexpr const char* kToolVersion = "0.3.0";

struct RunManifest {
    std::string command;             // subcommand name
    std::vector<std::string> argv;   // full argument list after the program name
    std::string config_json;         // resolved settings, serialized JSON object
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string timestamp_utc;       // ISO 8601, set by save()
    std::vector<std::string> outputs;  // filenames relative to the manifest

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
};

// Writes <dir>/manifest.json, stamping tool_version and timestamp_utc.
void save(RunManifest m, const std::string& dir);

// Accepts the manifest file or its directory.
RunManifest load(const std::string& path);

std::string utc_now_iso8601();

}  // namespace kernelde::manifest
