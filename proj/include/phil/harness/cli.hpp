#pragma once

namespace phil {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// phil-sim entry point: run, benchmark, validate-config, list-scenarios.
int cli_main(int argc, char** argv);

} // namespace phil
