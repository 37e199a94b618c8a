#pragma once

// End-to-end restoration: stabilize -> segment -> stack -> blend -> sharpen.
// Each stage can be bypassed; a bypassed stage passes its input through.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "turbkit/core.hpp"
#include "turbkit/flow.hpp"
#include "turbkit/segment.hpp"
#include "turbkit/stabilize.hpp"
#include "turbkit/stackblend.hpp"
#include "turbkit/turbstats.hpp"

namespace turbkit::pipeline {

// ---- sharpening ----

enum class SharpenMethod { none, unsharp, wiener, external };

struct SharpenParams {
    SharpenMethod method = SharpenMethod::unsharp;
    double amount = 0.5;       // unsharp
    double radius = 1.0;       // unsharp gaussian sigma
    double psf_sigma = 1.0;    // wiener
    double nsr = 0.01;         // wiener noise-to-signal ratio
    std::string command;       // external: run as `command IN OUT` on raw containers
};

// out = in + amount (in - gaussian(in, radius)), clamped to [0, 1].
Frame unsharp_mask(const Frame& frame, double amount, double radius);

// Frequency-domain Wiener deconvolution against a Gaussian PSF. The frame is
// reflect-padded before the transform to suppress wrap-around ringing.
Frame wiener_deconvolve(const Frame& frame, double psf_sigma, double nsr);

// unsharp / wiener per frame; `none` is the identity. External sharpening works
// on whole sequences, see sharpen_external.
Frame sharpen(const Frame& frame, const SharpenParams& params);

// Writes the sequence to a raw container, runs the command with the input and
// output paths appended, and reads the result back.
VideoSequence sharpen_external(const VideoSequence& seq, const std::string& command,
                               const std::filesystem::path& workdir);

// ---- configuration ----

struct StageFlags {
    bool stabilize = true;
    bool segment = true;
    bool stack = true;
    bool blend = true;
    bool sharpen = true;
};

struct PipelineConfig {
    int version = 1;
    StageFlags stages;
    int stabilizer_border = stabilize::default_crop_border;
    flow::FlowParams flow;
    std::size_t flow_cache_capacity = 64;
    segment::SegmentParams segmentation;
    turbstats::WindowCalibration calibration;
    std::optional<turbstats::OpticalConfig> optics;
    std::optional<double> stack_sigma;  // fixed window sigma; unset derives it from Cn^2
    stackblend::BlendParams blend;
    SharpenParams sharpen;
    unsigned workers = 0;
    ColorMode color = ColorMode::rgb;
    bool write_masks = true;
    std::string report_name = "report.json";

    void validate() const;  // throws Error(Errc::config)

    static PipelineConfig from_toml_file(const std::filesystem::path& path);
    static PipelineConfig from_toml_string(const std::string& text);
    std::string to_toml() const;
};

// ---- run ----

struct StageTiming {
    std::string name;
    double seconds = 0.0;
    double per_frame = 0.0;
};

struct LatencyReport {
    int width = 0;
    int height = 0;
    int frames = 0;
    std::vector<StageTiming> stages;  // enabled stages only, in pipeline order
    double total_per_frame = 0.0;     // sum of stage times per frame
    double read_seconds = 0.0;        // I/O, only when run through run_from_disk
    double write_seconds = 0.0;
    double end_to_end_per_frame = 0.0;
    std::uint64_t flow_cache_hits = 0;
    std::uint64_t flow_cache_misses = 0;

    std::string to_table() const;
    std::string to_json() const;
};

class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause) :
        Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineResult {
    VideoSequence restored;
    std::vector<MotionMask> masks;
    std::vector<stabilize::Offset> offsets;
    std::vector<int> n_opt;
    std::optional<turbstats::TurbulenceReport> turbulence;
    double stack_sigma = 0.0;
    LatencyReport latency;

    std::string to_json() const;  // reports only, no pixels
};

PipelineResult run_pipeline(const VideoSequence& input, const PipelineConfig& config);

LatencyReport report_latency(const PipelineResult& run);

// Loads the input, runs the pipeline and writes frames (and masks and the JSON
// report when enabled) to output_dir. The latency report includes I/O time.
PipelineResult run_from_disk(const std::filesystem::path& input, const std::filesystem::path& output_dir,
                             const PipelineConfig& config);

// Runs the pipeline on the input downscaled by each factor.
std::vector<LatencyReport> latency_at_scales(const VideoSequence& input, const PipelineConfig& config,
                                             const std::vector<double>& scales = {1.0, 0.5, 0.25});

// Derives cn2_low / cn2_high by estimating Cn^2 on the simulator's mildest and
// strongest presets applied to `scene`.
turbstats::WindowCalibration calibrate_window(const Frame& scene, int frames, std::uint64_t seed,
                                              const turbstats::WindowCalibration& base = {});

}  // namespace turbkit::pipeline
