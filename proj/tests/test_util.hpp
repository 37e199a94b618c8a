#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "turbkit/core.hpp"

namespace tk_test {

inline turbkit::Frame random_frame(int w, int h, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    turbkit::Frame f(w, h, c);
    for (float& v : f.samples()) {
        v = u(rng);
    }
    return f;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("turbkit_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace tk_test
