#include "turbkit/stackblend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "turbkit/imgproc.hpp"
#include "turbkit/turbstats.hpp"

namespace turbkit::stackblend {

StackedBackground gaussian_stack(const VideoSequence& seq, int center, double sigma, std::span<const MotionMask> masks) {
    if (seq.empty()) {
        throw Error(Errc::empty_sequence, "cannot stack an empty sequence");
    }
    if (!(sigma > 0.0)) {
        throw Error(Errc::invalid_argument, "stacking sigma must be positive");
    }
    const int n = static_cast<int>(seq.size());
    if (center < 0 || center >= n) {
        throw Error(Errc::out_of_range, "centre frame out of range");
    }
    if (!masks.empty() && masks.size() != seq.size()) {
        throw Error(Errc::length_mismatch, "mask count differs from frame count");
    }
    for (const MotionMask& m : masks) {
        if (m.width != seq.width() || m.height != seq.height()) {
            throw Error(Errc::dimension_mismatch, "mask does not match frame size");
        }
    }

    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int first = std::max(0, center - radius);
    const int last = std::min(n - 1, center + radius);
    std::vector<double> weights;
    for (int k = first; k <= last; ++k) {
        const double d = static_cast<double>(k - center);
        weights.push_back(std::exp(-d * d / (2.0 * sigma * sigma)));
    }

    const Frame& ref = seq[center];
    const int nc = ref.channels();
    const std::size_t pixels = ref.pixel_count();
    Frame out(ref.width(), ref.height(), nc, 0.0f, center);
    auto dst = out.samples();
    std::vector<double> acc(static_cast<std::size_t>(nc));
    for (std::size_t p = 0; p < pixels; ++p) {
        double wsum = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int k = first; k <= last; ++k) {
            if (!masks.empty() && masks[k].labels[p]) {
                continue;
            }
            const double wk = weights[k - first];
            if (wk == 0.0) {
                continue;
            }
            wsum += wk;
            auto src = seq[k].samples();
            for (int c = 0; c < nc; ++c) {
                acc[c] += wk * src[p * nc + c];
            }
        }
        if (wsum > 0.0) {
            for (int c = 0; c < nc; ++c) {
                dst[p * nc + c] = static_cast<float>(acc[c] / wsum);
            }
        } else {
            for (int c = 0; c < nc; ++c) {
                dst[p * nc + c] = ref.samples()[p * nc + c];
            }
        }
    }
    return StackedBackground{std::move(out), sigma, turbstats::window_span(sigma), center};
}

namespace {

void check_inputs(const Frame& background, const Frame& foreground, const MotionMask& mask) {
    if (!background.same_shape(foreground)) {
        throw Error(Errc::dimension_mismatch, "background and foreground differ in shape");
    }
    if (mask.width != background.width() || mask.height != background.height()) {
        throw Error(Errc::dimension_mismatch, "mask does not match frame size");
    }
}

struct Unknown {
    std::size_t pixel;
    int neighbours;                  // in-image neighbour count
    std::array<int, 4> inner;        // unknown indices of neighbours inside the region, -1 if none
    std::array<std::size_t, 4> outer;  // pixel indices of Dirichlet neighbours
    int outer_count;
};

}  // namespace

Frame poisson_blend(const Frame& background, const Frame& foreground, const MotionMask& region,
                    const BlendParams& params, PoissonStats* stats) {
    check_inputs(background, foreground, region);
    const int w = background.width();
    const int h = background.height();
    const int nc = background.channels();

    std::vector<int> unknown_of(static_cast<std::size_t>(w) * h, -1);
    std::vector<Unknown> unknowns;
    int minx = w, maxx = -1, miny = h, maxy = -1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (region.at(x, y)) {
                unknown_of[static_cast<std::size_t>(y) * w + x] = static_cast<int>(unknowns.size());
                unknowns.push_back(Unknown{static_cast<std::size_t>(y) * w + x, 0, {-1, -1, -1, -1}, {}, 0});
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
            }
        }
    }
    if (unknowns.empty()) {
        return background;
    }
    bool has_boundary = false;
    for (Unknown& u : unknowns) {
        const int x = static_cast<int>(u.pixel % w);
        const int y = static_cast<int>(u.pixel / w);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        int slot = 0;
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) {
                continue;
            }
            ++u.neighbours;
            const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
            if (unknown_of[q] >= 0) {
                u.inner[slot++] = unknown_of[q];
            } else {
                u.outer[u.outer_count++] = q;
                has_boundary = true;
            }
        }
    }
    if (!has_boundary) {
        return foreground;
    }

    double omega = params.sor_omega;
    if (!(omega > 0.0)) {
        const int extent = std::max(maxx - minx + 1, maxy - miny + 1);
        omega = 2.0 / (1.0 + std::sin(std::numbers::pi / (extent + 1)));
    }

    Frame out = background;
    PoissonStats local;
    const std::size_t m = unknowns.size();
    std::vector<double> f(m), rhs(m);
    for (int c = 0; c < nc; ++c) {
        auto bg = background.samples();
        auto fg = foreground.samples();
        for (std::size_t i = 0; i < m; ++i) {
            const Unknown& u = unknowns[i];
            const std::size_t p = u.pixel;
            const int x = static_cast<int>(p % w);
            const int y = static_cast<int>(p / w);
            double guidance = 0.0;
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) {
                    continue;
                }
                const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
                guidance += static_cast<double>(fg[p * nc + c]) - fg[q * nc + c];
            }
            double boundary = 0.0;
            for (int k = 0; k < u.outer_count; ++k) {
                boundary += bg[u.outer[k] * nc + c];
            }
            rhs[i] = guidance + boundary;
            f[i] = fg[p * nc + c];
        }

        auto residual = [&] {
            double r = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const Unknown& u = unknowns[i];
                double lhs = u.neighbours * f[i];
                for (int k = 0; k < 4 && u.inner[k] >= 0; ++k) {
                    lhs -= f[u.inner[k]];
                }
                r = std::max(r, std::abs(rhs[i] - lhs));
            }
            return r;
        };

        double r = residual();
        int iter = 0;
        if (stats) {
            local.residual_history.push_back(r);
        }
        while (r > params.tolerance && iter < params.max_iterations) {
            for (std::size_t i = 0; i < m; ++i) {
                const Unknown& u = unknowns[i];
                double sum = rhs[i];
                for (int k = 0; k < 4 && u.inner[k] >= 0; ++k) {
                    sum += f[u.inner[k]];
                }
                const double gs = sum / u.neighbours;
                f[i] += omega * (gs - f[i]);
            }
            ++iter;
            r = residual();
            if (stats) {
                local.residual_history.push_back(r);
            }
        }
        local.iterations = std::max(local.iterations, iter);
        local.residual = std::max(local.residual, r);

        auto dst = out.samples();
        for (std::size_t i = 0; i < m; ++i) {
            dst[unknowns[i].pixel * nc + c] = static_cast<float>(f[i]);
        }
    }
    local.converged = local.residual <= params.tolerance;
    if (stats) {
        *stats = std::move(local);
    }
    return out;
}

Frame pyramid_blend(const Frame& background, const Frame& foreground, const MotionMask& region,
                    const BlendParams& params) {
    check_inputs(background, foreground, region);
    const int w = background.width();
    const int h = background.height();
    const int nc = background.channels();

    Frame delta(w, h, nc);
    for (std::size_t i = 0; i < delta.samples().size(); ++i) {
        delta.samples()[i] = foreground.samples()[i] - background.samples()[i];
    }
    Frame weight(w, h, 1);
    for (std::size_t i = 0; i < weight.samples().size(); ++i) {
        weight.samples()[i] = region.labels[i] ? 1.0f : 0.0f;
    }
    weight = imgproc::gaussian_blur(weight, params.mask_blur_sigma);

    std::vector<Frame> gauss{delta};
    std::vector<Frame> masks{weight};
    for (int l = 1; l < params.pyramid_levels; ++l) {
        if (std::min(gauss.back().width(), gauss.back().height()) < 4) {
            break;
        }
        gauss.push_back(imgproc::pyr_down(gauss.back()));
        masks.push_back(imgproc::pyr_down(masks.back()));
    }
    const std::size_t levels = gauss.size();

    auto blend_level = [&](const Frame& band, const Frame& m) {
        Frame out = band;
        for (int y = 0; y < band.height(); ++y) {
            for (int x = 0; x < band.width(); ++x) {
                const float a = m.at(x, y);
                for (int c = 0; c < nc; ++c) {
                    out.at(x, y, c) = a == 0.0f ? 0.0f : a * band.at(x, y, c);
                }
            }
        }
        return out;
    };

    Frame collapsed = blend_level(gauss[levels - 1], masks[levels - 1]);
    for (std::size_t l = levels - 1; l-- > 0;) {
        const Frame& g = gauss[l];
        const Frame up = imgproc::pyr_up(gauss[l + 1], g.width(), g.height());
        Frame band(g.width(), g.height(), nc);
        for (std::size_t i = 0; i < band.samples().size(); ++i) {
            band.samples()[i] = g.samples()[i] - up.samples()[i];
        }
        Frame blended = blend_level(band, masks[l]);
        const Frame expanded = imgproc::pyr_up(collapsed, g.width(), g.height());
        for (std::size_t i = 0; i < blended.samples().size(); ++i) {
            blended.samples()[i] += expanded.samples()[i];
        }
        collapsed = std::move(blended);
    }

    // Coarse levels leak tiny corrections everywhere; keep them inside the
    // blurred mask footprint.
    Frame out = background;
    for (std::size_t i = 0; i < out.samples().size(); ++i) {
        if (weight.samples()[i / nc] > 0.0f) {
            out.samples()[i] += collapsed.samples()[i];
        }
    }
    return out;
}

Frame blend_foreground(const Frame& background, const Frame& foreground, const MotionMask& mask,
                       const BlendParams& params, PoissonStats* stats) {
    check_inputs(background, foreground, mask);
    const std::size_t count = mask.count();
    if (count == 0) {
        return background;
    }
    if (count == mask.labels.size()) {
        return foreground;
    }
    const MotionMask region = imgproc::dilate(mask, params.dilation);
    switch (params.mode) {
    case BlendMode::poisson: return poisson_blend(background, foreground, region, params, stats);
    case BlendMode::pyramid: return pyramid_blend(background, foreground, region, params);
    }
    return background;
}

}  // namespace turbkit::stackblend
