#include "turbkit/stabilize.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "turbkit/fft.hpp"
#include "turbkit/imgproc.hpp"
#include "turbkit/parallel.hpp"

namespace turbkit::stabilize {

namespace {

void check_border(int width, int height, int border) {
    if (border < 0) {
        throw Error(Errc::invalid_argument, "crop border must be non-negative");
    }
    if (2 * border >= std::min(width, height)) {
        throw Error(Errc::invalid_argument, "frame smaller than 2 x crop border (" + std::to_string(border) + ")");
    }
}

// Reference spectrum shared by all frames of a sequence.
class Correlator {
public:
    Correlator(const Frame& reference, double mean, int border) :
        width_(reference.width()), height_(reference.height()), border_(border), mean_(mean),
        plan_(reference.height(), reference.width()) {
        fft::RealBuffer real = plan_.make_real();
        auto src = reference.samples();
        for (std::size_t i = 0; i < real.size(); ++i) {
            real[i] = static_cast<double>(src[i]) - mean_;
        }
        reference_spectrum_ = plan_.make_complex();
        plan_.forward(real, reference_spectrum_);
    }

    CorrelationSurface correlate(const Frame& frame) const {
        const int cw = width_ - 2 * border_;
        const int ch = height_ - 2 * border_;
        // Crop placed at the origin of a zero canvas; no wrap-around can reach
        // the displacements we read back.
        fft::RealBuffer real = plan_.make_real();
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                real[static_cast<std::size_t>(y) * width_ + x] =
                    static_cast<double>(frame.at(x + border_, y + border_)) - mean_;
            }
        }
        fft::ComplexBuffer spec = plan_.make_complex();
        plan_.forward(real, spec);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            spec[i] = reference_spectrum_[i] * std::conj(spec[i]);
        }
        plan_.inverse(spec, real);

        // real(t) = sum_x crop(x) ref(x + t); displacement d = border - t.
        CorrelationSurface surface;
        surface.border = border_;
        surface.values.assign(static_cast<std::size_t>(surface.side()) * surface.side(), 0.0);
        const double norm = 1.0 / static_cast<double>(plan_.real_size());
        for (int dy = -border_; dy <= border_; ++dy) {
            for (int dx = -border_; dx <= border_; ++dx) {
                const int ty = border_ - dy;
                const int tx = border_ - dx;
                surface.values[static_cast<std::size_t>(dy + border_) * surface.side() + dx + border_] =
                    real[static_cast<std::size_t>(ty) * width_ + tx] * norm;
            }
        }
        return surface;
    }

private:
    int width_;
    int height_;
    int border_;
    double mean_;
    fft::RealPlan2D plan_;
    fft::ComplexBuffer reference_spectrum_;
};

}  // namespace

CorrelationSurface correlation_surface(const Frame& reference, const Frame& frame, int border) {
    if (reference.channels() != 1 || frame.channels() != 1 || !reference.same_shape(frame)) {
        throw Error(Errc::dimension_mismatch, "correlation expects two single-channel frames of equal size");
    }
    check_border(reference.width(), reference.height(), border);
    return Correlator(reference, 0.0, border).correlate(frame);
}

Offset surface_peak(const CorrelationSurface& surface) {
    const int b = surface.border;
    Offset best{};
    double best_value = surface.at(0, 0);
    auto closer = [](const Offset& a, const Offset& c) {
        const int ay = std::abs(a.dy), ax = std::abs(a.dx);
        const int cy = std::abs(c.dy), cx = std::abs(c.dx);
        if (ay != cy) return ay < cy;
        if (ax != cx) return ax < cx;
        if (a.dy != c.dy) return a.dy < c.dy;
        return a.dx < c.dx;
    };
    for (int dy = -b; dy <= b; ++dy) {
        for (int dx = -b; dx <= b; ++dx) {
            const double v = surface.at(dx, dy);
            const Offset cand{dx, dy};
            if (v > best_value || (v == best_value && closer(cand, best))) {
                best_value = v;
                best = cand;
            }
        }
    }
    return best;
}

std::vector<Offset> estimate_offsets(const VideoSequence& seq, int crop_border, unsigned workers) {
    if (seq.empty()) {
        throw Error(Errc::empty_sequence, "cannot stabilize an empty sequence");
    }
    check_border(seq.width(), seq.height(), crop_border);
    const VideoSequence luma = to_luma(seq);
    const double mean = sequence_mean(luma)[0];

    const Correlator correlator(luma[0], mean, crop_border);
    std::vector<Offset> offsets(luma.size());
    offsets[0] = Offset{};
    parallel_for(
        1, static_cast<std::ptrdiff_t>(luma.size()),
        [&](std::ptrdiff_t i) { offsets[i] = surface_peak(correlator.correlate(luma[i])); }, workers);
    return offsets;
}

VideoSequence apply_offsets(const VideoSequence& seq, std::span<const Offset> offsets) {
    if (offsets.size() != seq.size()) {
        throw Error(Errc::length_mismatch, "offset count " + std::to_string(offsets.size()) +
                                               " differs from frame count " + std::to_string(seq.size()));
    }
    std::vector<Frame> frames;
    frames.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        frames.push_back(imgproc::shift_replicate(seq[i], offsets[i].dx, offsets[i].dy));
    }
    return VideoSequence(std::move(frames), seq.frame_rate());
}

StabilizationResult stabilize(const VideoSequence& seq, int crop_border, unsigned workers) {
    StabilizationResult result;
    result.crop_border = crop_border;
    result.offsets = estimate_offsets(seq, crop_border, workers);
    result.stabilized = apply_offsets(seq, result.offsets);
    return result;
}

}  // namespace turbkit::stabilize
