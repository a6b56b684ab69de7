#pragma once

#include "fracpeak/config.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace fracpeak {

// pipeline order
inline constexpr std::array<std::string_view, 8> kStages{"ground",  "operators", "green", "project",
                                                         "poisson", "reduce",    "scan",  "report"};
bool is_stage(std::string_view name);

std::string code_version();

// manifest.json in the output directory: config echo, per-stage status and
// one inventory entry per emitted file (path relative to the directory)
class Manifest {
public:
    explicit Manifest(std::filesystem::path dir);
    const std::filesystem::path& dir() const { return dir_; }
    void begin(const std::string& stage, const RunConfig& cfg);
    void record(const std::filesystem::path& file);
    void finish(const std::string& stage, const std::string& status, int exit_code, const std::string& message);
    void save() const;
    const nlohmann::json& data() const { return j_; }

private:
    std::filesystem::path dir_;
    nlohmann::json j_;
    std::map<std::string, nlohmann::json> files_;
    std::string stage_;
};

std::uint32_t file_crc32(const std::filesystem::path& path);

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitDependency = 4;

struct StageOutcome {
    int exit_code = kExitOk;
    std::string message;
};

// runs one stage into cfg.out and updates the manifest; library errors are
// mapped onto exit codes here rather than escaping
StageOutcome run_stage(const std::string& stage, const RunConfig& cfg);
// every stage in pipeline order; stops at the first config or dependency error
StageOutcome run_all(const RunConfig& cfg);

} // namespace fracpeak
