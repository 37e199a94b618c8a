#pragma once

// Dense optical flow between frame pairs.
//
// The built-in estimator is a coarse-to-fine Horn-Schunck solver with
// incremental warping. Any other source of flow (for instance a learned model
// run out of process) can be plugged in through FlowEstimator; ImportedFlow
// reads fields exported to raw containers.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::flow {

struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> u;
    std::vector<float> v;
    int source_index = 0;
    int target_index = 0;

    FlowField() = default;
    FlowField(int w, int h) :
        width(w), height(h), u(static_cast<std::size_t>(w) * h, 0.0f), v(static_cast<std::size_t>(w) * h, 0.0f) {}

    std::size_t pixel_count() const noexcept { return u.size(); }
    friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct FlowParams {
    int levels = 4;
    double scale = 0.5;
    int iterations = 50;      // Jacobi sweeps per warp
    int warps = 2;            // linearizations per pyramid level
    double smoothness = 15.0; // alpha, in 8-bit intensity units
    double presmooth_sigma = 1.0;

    // Stable textual form, used as the cache key digest.
    std::string canonical() const;
};

class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    // Displacement mapping pixels of `a` to their position in `b`.
    virtual FlowField compute(const Frame& a, const Frame& b) const = 0;
    // Identifies everything that influences the output besides the frames.
    virtual std::string digest() const = 0;
};

class PyramidalFlow final : public FlowEstimator {
public:
    explicit PyramidalFlow(FlowParams params = {});
    FlowField compute(const Frame& a, const Frame& b) const override;
    std::string digest() const override;
    const FlowParams& params() const noexcept { return params_; }

private:
    FlowParams params_;
};

// Reads flow_<source>_<target>.tkr from a directory, keyed by Frame::index().
class ImportedFlow final : public FlowEstimator {
public:
    explicit ImportedFlow(std::filesystem::path dir);
    FlowField compute(const Frame& a, const Frame& b) const override;
    std::string digest() const override;

    static std::string filename(int source, int target);

private:
    std::filesystem::path dir_;
};

// Convenience wrapper around PyramidalFlow.
FlowField compute_flow(const Frame& a, const Frame& b, const FlowParams& params = {});

// Per-pixel Euclidean magnitude as a single-channel frame.
Frame flow_magnitude(const FlowField& f);

void write_flow(const FlowField& f, const std::filesystem::path& path);
FlowField read_flow(const std::filesystem::path& path);

}  // namespace turbkit::flow
