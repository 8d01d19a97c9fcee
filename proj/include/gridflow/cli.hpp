#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridflow/config.hpp"
#include "gridflow/train.hpp"

namespace gridflow {

// Scenario directory loaded through its manifest.
struct LoadedScenario {
    std::shared_ptr<std::vector<Movie>> movies;
    std::vector<Regime> regimes;
    StaticMap static_map;
    SplitIndices split;
};

LoadedScenario load_scenario(const std::string& data_dir);

// Entry point behind the gridflow binary. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace gridflow
