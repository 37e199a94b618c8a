#include "turbkit/core.hpp"

#include <algorithm>
#include <string>

namespace turbkit {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::missing_path: return "missing path";
    case Errc::no_frames: return "no frames found";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::io_failure: return "i/o failure";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::empty_sequence: return "empty sequence";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::out_of_range: return "out of range";
    case Errc::degenerate_gradient: return "degenerate gradient";
    case Errc::config: return "configuration error";
    }
    return "unknown";
}

Frame::Frame(int width, int height, int channels, float fill, int index) :
    width_(width), height_(height), channels_(channels), index_(index) {
    if (width < 0 || height < 0 || channels < 1) {
        throw Error(Errc::invalid_argument, "invalid frame shape");
    }
    samples_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Frame::Frame(int width, int height, int channels, std::vector<float> samples, int index) :
    width_(width), height_(height), channels_(channels), index_(index), samples_(std::move(samples)) {
    if (width < 0 || height < 0 || channels < 1) {
        throw Error(Errc::invalid_argument, "invalid frame shape");
    }
    if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw Error(Errc::dimension_mismatch, "sample count does not match width x height x channels");
    }
}

Frame Frame::channel(int c) const {
    if (c < 0 || c >= channels_) {
        throw Error(Errc::out_of_range, "channel index out of range");
    }
    if (channels_ == 1) {
        return *this;
    }
    Frame out(width_, height_, 1, 0.0f, index_);
    auto dst = out.samples();
    const std::size_t n = pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        dst[i] = samples_[i * channels_ + c];
    }
    return out;
}

Frame merge_channels(std::span<const Frame> planes) {
    if (planes.empty()) {
        throw Error(Errc::invalid_argument, "no planes to merge");
    }
    const int w = planes[0].width();
    const int h = planes[0].height();
    const int nc = static_cast<int>(planes.size());
    if (nc == 1) {
        return planes[0];
    }
    Frame out(w, h, nc, 0.0f, planes[0].index());
    auto dst = out.samples();
    for (int c = 0; c < nc; ++c) {
        if (planes[c].width() != w || planes[c].height() != h || planes[c].channels() != 1) {
            throw Error(Errc::dimension_mismatch, "planes differ in shape");
        }
        auto src = planes[c].samples();
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i * nc + c] = src[i];
        }
    }
    return out;
}

VideoSequence::VideoSequence(std::vector<Frame> frames, double frame_rate) :
    frames_(std::move(frames)), frame_rate_(frame_rate) {
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        if (!frames_[i].same_shape(frames_.front())) {
            throw Error(Errc::dimension_mismatch,
                        "dimension mismatch: frame " + std::to_string(i) + " differs from frame 0");
        }
        frames_[i].set_index(static_cast<int>(i));
    }
}

std::size_t MotionMask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; }));
}

std::vector<double> sequence_mean(const VideoSequence& seq) {
    if (seq.empty()) {
        throw Error(Errc::empty_sequence, "sequence_mean of an empty sequence");
    }
    const int nc = seq.channels();
    std::vector<double> sum(nc, 0.0);
    for (const Frame& f : seq) {
        // Per-frame partial sums keep the accumulation error independent of sequence length.
        std::vector<double> partial(nc, 0.0);
        auto s = f.samples();
        for (std::size_t i = 0; i < s.size(); ++i) {
            partial[i % nc] += s[i];
        }
        for (int c = 0; c < nc; ++c) {
            sum[c] += partial[c];
        }
    }
    const double count = static_cast<double>(seq.size()) * static_cast<double>(seq[0].pixel_count());
    for (double& v : sum) {
        v /= count;
    }
    return sum;
}

Frame to_luma(const Frame& frame) {
    if (frame.channels() == 1) {
        return frame;
    }
    if (frame.channels() != 3) {
        throw Error(Errc::unsupported_format, "to_luma expects 1 or 3 channels");
    }
    Frame out(frame.width(), frame.height(), 1, 0.0f, frame.index());
    auto src = frame.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const float v = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
        dst[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

VideoSequence to_luma(const VideoSequence& seq) {
    if (seq.channels() == 1) {
        return seq;
    }
    std::vector<Frame> frames;
    frames.reserve(seq.size());
    for (const Frame& f : seq) {
        frames.push_back(to_luma(f));
    }
    return VideoSequence(std::move(frames), seq.frame_rate());
}

Frame to_rgb(const Frame& frame) {
    if (frame.channels() == 3) {
        return frame;
    }
    if (frame.channels() != 1) {
        throw Error(Errc::unsupported_format, "to_rgb expects 1 or 3 channels");
    }
    const Frame planes[3] = {frame, frame, frame};
    return merge_channels(planes);
}

}  // namespace turbkit
