#pragma once

// Procedural tilt-and-blur turbulence simulator.
//
// Tilt: two fractal simplex volumes N_x, N_y over (x, y, t) give per-pixel
// displacements; every frame is backward-warped with its slice.
// Blur: a fractal Perlin volume modulated by the local tilt magnitude gives a
// per-pixel Gaussian sigma, applied through a bank of pre-blurred images.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "turbkit/core.hpp"
#include "turbkit/noise.hpp"

namespace turbkit::simulate {

struct TurbulenceParams {
    int tilt_octaves = 8;
    double tilt_frequency = 0.03;   // cycles per pixel of octave 0, within [0.015, 0.06]
    double tilt_persistence = 0.25; // A_i = persistence^i
    double tilt_amplitude = 2.0;    // max |displacement| in pixels
    double temporal_scale = 1.0;    // time axis stretch applied before sampling
    int blur_levels = 11;
    double blur_sigma_max = 1.5;    // pixels
    double blur_frequency = 0.03;
    int blur_octaves = 3;
    double blur_perlin_weight = 0.5;
    double blur_tilt_weight = 0.5;
    std::uint64_t seed = 0;

    static constexpr double min_tilt_frequency = 0.015;
    static constexpr double max_tilt_frequency = 0.06;

    void validate() const;
};

// Both volumes scaled so that max |value| == tilt_amplitude (zero when the
// amplitude is zero). The y volume uses a derived seed.
std::pair<noise::NoiseVolume, noise::NoiseVolume> generate_tilt_volumes(const TurbulenceParams& params, int height,
                                                                          int width, int frames,
                                                                          unsigned workers = 0);

// out(x, y) = in(x + dx(x, y), y + dy(x, y)), bilinear with edge clamping.
// `dx` and `dy` point at width*height displacement samples.
Frame warp_frame(const Frame& frame, const float* dx, const float* dy);
Frame warp_frame(const Frame& frame, const Frame& dx, const Frame& dy);

// Spatially varying Gaussian blur. Blurred copies at sigma_j = j * top / (levels - 1)
// are blended linearly between adjacent levels; `top` defaults to max(blur_map).
Frame apply_adaptive_blur(const Frame& frame, const Frame& blur_map, int levels = 11,
                          std::optional<double> sigma_top = std::nullopt);

struct GroundTruth {
    noise::NoiseVolume tilt_x;
    noise::NoiseVolume tilt_y;
    noise::NoiseVolume blur_sigma;  // per-pixel sigma actually applied
};

struct SimulationResult {
    VideoSequence degraded;
    GroundTruth truth;
};

SimulationResult simulate_sequence(const VideoSequence& clean, const TurbulenceParams& params, unsigned workers = 0);

// Writes a noise volume as a single-channel raw container with one frame per slice.
void write_volume(const noise::NoiseVolume& volume, const std::filesystem::path& path);
noise::NoiseVolume read_volume(const std::filesystem::path& path);

// ---- synthetic scenes ----

// Dark axis-aligned lines of `thickness` pixels every `spacing` pixels on a
// light background.
Frame grid_target(int width, int height, int spacing = 16, int thickness = 2);

// Single-channel fractal Perlin texture mapped into [0.1, 0.9].
Frame textured_scene(int width, int height, std::uint64_t seed);

// ---- dataset generation ----

struct DatasetOptions {
    int count = 0;
    double severity_min = 0.0;
    double severity_max = 1.0;
    int width = 256;
    int height = 256;
    int frames = 16;
    std::uint64_t master_seed = 0;
    unsigned workers = 0;
};

struct ClipRecord {
    int clip_id = 0;
    std::uint64_t seed = 0;
    double severity = 0.0;
    TurbulenceParams params;
    std::string clean_path;
    std::string degraded_path;
    std::string tilt_x_path;
    std::string tilt_y_path;
    std::string blur_path;
    std::string source;
    std::string error;     // empty on success
    double seconds = 0.0;  // wall time, not written to the manifest
};

struct DatasetManifest {
    std::vector<ClipRecord> clips;
    std::string to_json() const;
};

// Maps severity in [0, 1] onto amplitude, frequency and blur.
TurbulenceParams params_for_severity(double severity, std::uint64_t seed);

// Per-clip seed derived from the master seed (splitmix64).
std::uint64_t clip_seed(std::uint64_t master_seed, int clip_id);

// Source PNG images in `source_dir` are cropped/resized into static clean
// clips. Writes out_dir/clip_NNNNNN/{clean,degraded}/frame_*.png, the three
// ground-truth volumes and out_dir/manifest.json. Failures are recorded per
// clip and do not stop the batch.
DatasetManifest generate_dataset(const std::filesystem::path& source_dir, const std::filesystem::path& out_dir,
                                 const DatasetOptions& options);

}  // namespace turbkit::simulate
