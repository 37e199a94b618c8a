#include "turbkit/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace turbkit::imgproc {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Row-wise spans of the disk: for each dy, the half-width of the chord.
std::vector<int> disk_chords(int radius) {
    std::vector<int> chords(2 * radius + 1);
    for (int dy = -radius; dy <= radius; ++dy) {
        chords[dy + radius] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
    }
    return chords;
}

MotionMask morph(const MotionMask& mask, int radius, bool dilation) {
    if (radius <= 0) {
        return mask;
    }
    const int w = mask.width;
    const int h = mask.height;
    // Horizontal prefix counts let each chord be tested in O(1).
    std::vector<int> prefix(static_cast<std::size_t>(w + 1) * h, 0);
    for (int y = 0; y < h; ++y) {
        int* row = &prefix[static_cast<std::size_t>(y) * (w + 1)];
        for (int x = 0; x < w; ++x) {
            row[x + 1] = row[x] + (mask.at(x, y) ? 1 : 0);
        }
    }
    const auto chords = disk_chords(radius);
    MotionMask out = mask;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool value = !dilation;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                const int half = chords[dy + radius];
                if (yy < 0 || yy >= h) {
                    continue;
                }
                const int x0 = x - half;
                const int x1 = x + half;
                // Out-of-image taps are skipped: background for dilation, foreground for erosion.
                const int cx0 = std::max(x0, 0);
                const int cx1 = std::min(x1, w - 1);
                const int* row = &prefix[static_cast<std::size_t>(yy) * (w + 1)];
                const int ones = row[cx1 + 1] - row[cx0];
                if (dilation) {
                    if (ones > 0) {
                        value = true;
                        break;
                    }
                } else {
                    if (ones < cx1 - cx0 + 1) {
                        value = false;
                        break;
                    }
                }
            }
            out.set(x, y, value);
        }
    }
    return out;
}

}  // namespace

std::vector<float> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) {
        return {1.0f};
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += taps[i + radius];
    }
    std::vector<float> kernel(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) {
        kernel[i] = static_cast<float>(taps[i] / sum);
    }
    return kernel;
}

Frame convolve_separable(const Frame& src, const std::vector<float>& kx, const std::vector<float>& ky) {
    const int w = src.width();
    const int h = src.height();
    const int nc = src.channels();
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);

    Frame tmp(w, h, nc, 0.0f, src.index());
    std::vector<float> line(static_cast<std::size_t>(w + 2 * rx) * nc);
    for (int y = 0; y < h; ++y) {
        for (int x = -rx; x < w + rx; ++x) {
            const int sx = clampi(x, 0, w - 1);
            for (int c = 0; c < nc; ++c) {
                line[static_cast<std::size_t>(x + rx) * nc + c] = src.at(sx, y, c);
            }
        }
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < nc; ++c) {
                float acc = 0.0f;
                for (int k = 0; k < static_cast<int>(kx.size()); ++k) {
                    acc += kx[k] * line[static_cast<std::size_t>(x + k) * nc + c];
                }
                tmp.at(x, y, c) = acc;
            }
        }
    }

    Frame out(w, h, nc, 0.0f, src.index());
    const std::size_t stride = static_cast<std::size_t>(w) * nc;
    std::vector<float> acc(stride);
    auto tsrc = tmp.samples();
    auto dst = out.samples();
    for (int y = 0; y < h; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int k = 0; k < static_cast<int>(ky.size()); ++k) {
            const int sy = clampi(y + k - ry, 0, h - 1);
            const float wk = ky[k];
            const float* row = tsrc.data() + sy * stride;
            for (std::size_t i = 0; i < stride; ++i) {
                acc[i] += wk * row[i];
            }
        }
        std::copy(acc.begin(), acc.end(), dst.begin() + y * stride);
    }
    return out;
}

Frame gaussian_blur(const Frame& src, double sigma) {
    if (!(sigma > 0.0)) {
        return src;
    }
    const auto k = gaussian_kernel(sigma);
    return convolve_separable(src, k, k);
}

Frame resize_bilinear(const Frame& src, int width, int height) {
    if (width == src.width() && height == src.height()) {
        return src;
    }
    Frame out(width, height, src.channels(), 0.0f, src.index());
    const float sx = static_cast<float>(src.width()) / static_cast<float>(width);
    const float sy = static_cast<float>(src.height()) / static_cast<float>(height);
    for (int y = 0; y < height; ++y) {
        const float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
        for (int x = 0; x < width; ++x) {
            const float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
            for (int c = 0; c < src.channels(); ++c) {
                out.at(x, y, c) = sample_bilinear(src, fx, fy, c);
            }
        }
    }
    return out;
}

Frame downscale(const Frame& src, double scale) {
    if (scale >= 1.0) {
        return src;
    }
    const int w = std::max(1, static_cast<int>(std::lround(src.width() * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(src.height() * scale)));
    // Anti-alias prefilter sized for the decimation ratio.
    const double sigma = 0.5 * std::sqrt(1.0 / (scale * scale) - 1.0);
    return resize_bilinear(gaussian_blur(src, sigma), w, h);
}

std::pair<Frame, Frame> gradient_central(const Frame& plane) {
    const int w = plane.width();
    const int h = plane.height();
    Frame gx(w, h, 1), gy(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (w > 1) {
                if (x == 0) {
                    gx.at(x, y) = plane.at(1, y) - plane.at(0, y);
                } else if (x == w - 1) {
                    gx.at(x, y) = plane.at(w - 1, y) - plane.at(w - 2, y);
                } else {
                    gx.at(x, y) = 0.5f * (plane.at(x + 1, y) - plane.at(x - 1, y));
                }
            }
            if (h > 1) {
                if (y == 0) {
                    gy.at(x, y) = plane.at(x, 1) - plane.at(x, 0);
                } else if (y == h - 1) {
                    gy.at(x, y) = plane.at(x, h - 1) - plane.at(x, h - 2);
                } else {
                    gy.at(x, y) = 0.5f * (plane.at(x, y + 1) - plane.at(x, y - 1));
                }
            }
        }
    }
    return {std::move(gx), std::move(gy)};
}

std::pair<Frame, Frame> sobel(const Frame& plane) {
    const int w = plane.width();
    const int h = plane.height();
    Frame gx(w, h, 1), gy(w, h, 1);
    auto px = [&](int x, int y) { return plane.at(clampi(x, 0, w - 1), clampi(y, 0, h - 1)); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            gx.at(x, y) = (px(x + 1, y - 1) + 2.0f * px(x + 1, y) + px(x + 1, y + 1)) -
                          (px(x - 1, y - 1) + 2.0f * px(x - 1, y) + px(x - 1, y + 1));
            gy.at(x, y) = (px(x - 1, y + 1) + 2.0f * px(x, y + 1) + px(x + 1, y + 1)) -
                          (px(x - 1, y - 1) + 2.0f * px(x, y - 1) + px(x + 1, y - 1));
        }
    }
    return {std::move(gx), std::move(gy)};
}

Frame pyr_down(const Frame& src) {
    static const std::vector<float> k = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
    const Frame blurred = convolve_separable(src, k, k);
    const int w = (src.width() + 1) / 2;
    const int h = (src.height() + 1) / 2;
    Frame out(w, h, src.channels(), 0.0f, src.index());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < src.channels(); ++c) {
                out.at(x, y, c) = blurred.at(2 * x, 2 * y, c);
            }
        }
    }
    return out;
}

Frame pyr_up(const Frame& src, int width, int height) {
    // Zero-insertion upsampling followed by the 5-tap kernel scaled by 2 per axis.
    Frame up(width, height, src.channels(), 0.0f, src.index());
    for (int y = 0; y < src.height() && 2 * y < height; ++y) {
        for (int x = 0; x < src.width() && 2 * x < width; ++x) {
            for (int c = 0; c < src.channels(); ++c) {
                up.at(2 * x, 2 * y, c) = src.at(x, y, c);
            }
        }
    }
    static const std::vector<float> k = {2.0f / 16, 8.0f / 16, 12.0f / 16, 8.0f / 16, 2.0f / 16};
    // Zero taps near the border would otherwise darken it; normalize by the
    // response of the same filter applied to the insertion pattern.
    Frame ones(width, height, 1, 0.0f);
    for (int y = 0; y < height; y += 2) {
        for (int x = 0; x < width; x += 2) {
            ones.at(x, y) = 1.0f;
        }
    }
    Frame num = convolve_separable(up, k, k);
    const Frame den = convolve_separable(ones, k, k);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const float d = den.at(x, y);
            for (int c = 0; c < src.channels(); ++c) {
                num.at(x, y, c) = d > 0.0f ? num.at(x, y, c) / d : 0.0f;
            }
        }
    }
    return num;
}

Frame shift_replicate(const Frame& src, int dx, int dy) {
    if (dx == 0 && dy == 0) {
        return src;
    }
    const int w = src.width();
    const int h = src.height();
    Frame out(w, h, src.channels(), 0.0f, src.index());
    for (int y = 0; y < h; ++y) {
        const int sy = clampi(y + dy, 0, h - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = clampi(x + dx, 0, w - 1);
            for (int c = 0; c < src.channels(); ++c) {
                out.at(x, y, c) = src.at(sx, sy, c);
            }
        }
    }
    return out;
}

MotionMask dilate(const MotionMask& mask, int radius) { return morph(mask, radius, true); }
MotionMask erode(const MotionMask& mask, int radius) { return morph(mask, radius, false); }
MotionMask open(const MotionMask& mask, int radius) { return dilate(erode(mask, radius), radius); }
MotionMask close(const MotionMask& mask, int radius) { return erode(dilate(mask, radius), radius); }

MotionMask fill_holes(const MotionMask& mask) {
    const int w = mask.width;
    const int h = mask.height;
    std::vector<std::uint8_t> reached(mask.labels.size(), 0);
    std::deque<std::pair<int, int>> queue;
    auto seed = [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!mask.labels[i] && !reached[i]) {
            reached[i] = 1;
            queue.emplace_back(x, y);
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        if (x > 0) seed(x - 1, y);
        if (x + 1 < w) seed(x + 1, y);
        if (y > 0) seed(x, y - 1);
        if (y + 1 < h) seed(x, y + 1);
    }
    MotionMask out = mask;
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        out.labels[i] = reached[i] ? 0 : 1;
    }
    return out;
}

double mean_gradient_magnitude(const Frame& plane) {
    const auto [gx, gy] = gradient_central(plane);
    double sum = 0.0;
    auto a = gx.samples();
    auto b = gy.samples();
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::hypot(static_cast<double>(a[i]), static_cast<double>(b[i]));
    }
    return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

}  // namespace turbkit::imgproc
