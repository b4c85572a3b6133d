#pragma once

#include <string>

#include "steam/model.hpp"
#include "steam/train.hpp"

namespace steam {

// Run configuration loadable from a JSON file (schema in the README).
// Command-line flags override file values.
struct RunConfig {
    ModelConfig model;
    TrainOptions train;
    std::uint64_t seed = 42;

    static RunConfig defaults();
    static RunConfig from_file(const std::string& path);
    std::string echo() const;  // effective config, printed at startup
};

}  // namespace steam
