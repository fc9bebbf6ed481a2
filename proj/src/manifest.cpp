#include "kernelde/manifest.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kernelde::manifest {

std::string utc_now_iso8601()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string RunManifest::to_json() const
{
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config_json.empty() ? nlohmann::ordered_json::object()
                                      : nlohmann::ordered_json::parse(config_json);
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["timestamp_utc"] = timestamp_utc;
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("manifest: bad JSON: ") + e.what());
    }
    if (j.value("schema", 0) != 1) throw std::invalid_argument("manifest: unknown schema");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config_json = j.at("config").dump();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.tool_version = j.value("tool_version", "");
    m.timestamp_utc = j.value("timestamp_utc", "");
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
}

void save(RunManifest m, const std::string& dir)
{
    m.tool_version = kToolVersion;
    m.timestamp_utc = utc_now_iso8601();
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / "manifest.json";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("manifest: cannot write " + path.string());
    os << m.to_json();
}

RunManifest load(const std::string& path)
{
    std::filesystem::path p(path);
    if (std::filesystem::is_directory(p)) p /= "manifest.json";
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("manifest: cannot read " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return RunManifest::from_json(ss.str());
}

}  // namespace kernelde::manifest
