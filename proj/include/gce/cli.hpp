#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace gce {

// Exit codes of the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Environment variable naming the default output root ("runs" if unset).
inline constexpr const char* kOutRootEnv = "GCE_OUT_ROOT";

// Runs `gce <subcommand> ...`. Primary results go to `out`, progress and
// errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Hash stored in checkpoints: the resolved config without its `out=` line,
// so the output location does not change the checkpoint bytes.
std::string run_config_hash(std::string_view config_toml);

// Creates <root>/<YYYYmmdd-HHMMSS>-seed<seed>, adding a numeric suffix when
// that name is taken. Never reuses an existing directory.
std::filesystem::path make_run_dir(const std::filesystem::path& root, unsigned long long seed);

}  // namespace gce
