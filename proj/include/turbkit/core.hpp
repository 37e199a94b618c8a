#pragma once

// Frame / sequence data model shared by every turbkit module.
//
// Samples are 32-bit floats, row-major, channels interleaved. A Frame is also
// used for single-channel scalar maps (blur sigma, AOF values, flow planes).

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace turbkit {

enum class Errc {
    missing_path,
    no_frames,
    dimension_mismatch,
    unsupported_format,
    io_failure,
    invalid_argument,
    empty_sequence,
    length_mismatch,
    out_of_range,
    degenerate_gradient,
    config,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

enum class ColorMode { luma, rgb };

class Frame {
public:
    Frame() = default;
    Frame(int width, int height, int channels, float fill = 0.0f, int index = 0);
    Frame(int width, int height, int channels, std::vector<float> samples, int index = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    int index() const noexcept { return index_; }
    void set_index(int index) noexcept { index_ = index; }

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool empty() const noexcept { return samples_.empty(); }

    float at(int x, int y, int c = 0) const noexcept {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float& at(int x, int y, int c = 0) noexcept {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<const float> samples() const noexcept { return samples_; }
    std::span<float> samples() noexcept { return samples_; }

    bool same_shape(const Frame& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    // Single channel copy of channel c.
    Frame channel(int c) const;

    friend bool operator==(const Frame& a, const Frame& b) {
        return a.same_shape(b) && a.samples_ == b.samples_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    int index_ = 0;
    std::vector<float> samples_;
};

// Interleave single-channel planes back into one frame.
Frame merge_channels(std::span<const Frame> planes);

class VideoSequence {
public:
    VideoSequence() = default;
    // Validates identical shapes and renumbers frame indices from 0.
    explicit VideoSequence(std::vector<Frame> frames, double frame_rate = 0.0);

    std::size_t size() const noexcept { return frames_.size(); }
    bool empty() const noexcept { return frames_.empty(); }
    int width() const noexcept { return frames_.empty() ? 0 : frames_.front().width(); }
    int height() const noexcept { return frames_.empty() ? 0 : frames_.front().height(); }
    int channels() const noexcept { return frames_.empty() ? 0 : frames_.front().channels(); }
    double frame_rate() const noexcept { return frame_rate_; }

    const Frame& operator[](std::size_t i) const { return frames_[i]; }
    const std::vector<Frame>& frames() const noexcept { return frames_; }

    auto begin() const noexcept { return frames_.begin(); }
    auto end() const noexcept { return frames_.end(); }

    friend bool operator==(const VideoSequence& a, const VideoSequence& b) {
        return a.frames_ == b.frames_;
    }

private:
    std::vector<Frame> frames_;
    double frame_rate_ = 0.0;
};

// Binary per-pixel labelling, true = dynamic foreground.
struct MotionMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;
    float threshold = 0.5f;
    int frame_index = 0;

    MotionMask() = default;
    MotionMask(int w, int h, bool fill = false) :
        width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const noexcept { return labels[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) noexcept { labels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }
};

// Per-channel arithmetic mean over all pixels of all frames.
std::vector<double> sequence_mean(const VideoSequence& seq);

// Rec.601 luma. Single-channel frames pass through unchanged.
Frame to_luma(const Frame& frame);
VideoSequence to_luma(const VideoSequence& seq);

// Grey frames are replicated into three channels; RGB frames pass through.
Frame to_rgb(const Frame& frame);

}  // namespace turbkit
