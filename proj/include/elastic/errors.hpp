#pragma once

#include <stdexcept>
#include <string>

namespace elastic {

// Bad or inconsistent user input. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite state, failed solve or violated conservation. Maps to exit code 3.
struct NumericalAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace elastic
