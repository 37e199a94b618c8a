#include "turbkit/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "turbkit/imgproc.hpp"
#include "turbkit/io.hpp"

namespace turbkit::flow {

namespace {

struct Level {
    Frame a;
    Frame b;
};

Frame scaled_255(const Frame& f) {
    Frame out = to_luma(f);
    for (float& v : out.samples()) {
        v *= 255.0f;
    }
    return out;
}

// Horn-Schunck neighbourhood average (1/6 edge neighbours, 1/12 corners).
void hs_average(const std::vector<float>& src, std::vector<float>& dst, int w, int h) {
    auto at = [&](int x, int y) {
        x = x < 0 ? 0 : (x >= w ? w - 1 : x);
        y = y < 0 ? 0 : (y >= h ? h - 1 : y);
        return src[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y) {
        const bool inner_y = y > 0 && y < h - 1;
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (inner_y && x > 0 && x < w - 1) {
                const float* r0 = &src[i - w];
                const float* r1 = &src[i];
                const float* r2 = &src[i + w];
                dst[i] = (r0[0] + r1[-1] + r1[1] + r2[0]) * (1.0f / 6.0f) +
                         (r0[-1] + r0[1] + r2[-1] + r2[1]) * (1.0f / 12.0f);
            } else {
                dst[i] = (at(x, y - 1) + at(x - 1, y) + at(x + 1, y) + at(x, y + 1)) * (1.0f / 6.0f) +
                         (at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1)) * (1.0f / 12.0f);
            }
        }
    }
}

void refine_level(const Frame& a, const Frame& b, FlowField& flow, const FlowParams& p) {
    const int w = a.width();
    const int h = a.height();
    const std::size_t n = a.pixel_count();
    const float alpha2 = static_cast<float>(p.smoothness * p.smoothness);

    const auto [ax, ay] = imgproc::gradient_central(a);
    std::vector<float> ix(n), iy(n), it(n), denom(n);
    std::vector<float> ubar(n), vbar(n), u0(n), v0(n);
    Frame warped(w, h, 1);

    for (int warp = 0; warp < p.warps; ++warp) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                warped.at(x, y) = imgproc::sample_bilinear(b, static_cast<float>(x) + flow.u[i],
                                                           static_cast<float>(y) + flow.v[i]);
            }
        }
        const auto [bx, by] = imgproc::gradient_central(warped);
        auto as = a.samples();
        auto ws = warped.samples();
        for (std::size_t i = 0; i < n; ++i) {
            ix[i] = 0.5f * (ax.samples()[i] + bx.samples()[i]);
            iy[i] = 0.5f * (ay.samples()[i] + by.samples()[i]);
            it[i] = ws[i] - as[i];
            denom[i] = 1.0f / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
        }
        u0 = flow.u;
        v0 = flow.v;
        for (int iter = 0; iter < p.iterations; ++iter) {
            hs_average(flow.u, ubar, w, h);
            hs_average(flow.v, vbar, w, h);
            for (std::size_t i = 0; i < n; ++i) {
                const float r = (ix[i] * (ubar[i] - u0[i]) + iy[i] * (vbar[i] - v0[i]) + it[i]) * denom[i];
                flow.u[i] = ubar[i] - ix[i] * r;
                flow.v[i] = vbar[i] - iy[i] * r;
            }
        }
    }
}

FlowField upsample(const FlowField& f, int w, int h) {
    Frame u(f.width, f.height, 1, std::vector<float>(f.u));
    Frame v(f.width, f.height, 1, std::vector<float>(f.v));
    const Frame ur = imgproc::resize_bilinear(u, w, h);
    const Frame vr = imgproc::resize_bilinear(v, w, h);
    const float sx = static_cast<float>(w) / static_cast<float>(f.width);
    const float sy = static_cast<float>(h) / static_cast<float>(f.height);
    FlowField out(w, h);
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        out.u[i] = ur.samples()[i] * sx;
        out.v[i] = vr.samples()[i] * sy;
    }
    return out;
}

}  // namespace

std::string FlowParams::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "hs;levels=" << levels << ";scale=" << scale << ";iterations=" << iterations << ";warps=" << warps
       << ";smoothness=" << smoothness << ";presmooth=" << presmooth_sigma;
    return os.str();
}

PyramidalFlow::PyramidalFlow(FlowParams params) : params_(params) {
    if (params_.levels < 1 || params_.iterations < 0 || params_.warps < 1 || !(params_.scale > 0.0) ||
        params_.scale >= 1.0 || !(params_.smoothness > 0.0)) {
        throw Error(Errc::invalid_argument, "invalid flow parameters");
    }
}

std::string PyramidalFlow::digest() const { return params_.canonical(); }

FlowField PyramidalFlow::compute(const Frame& a, const Frame& b) const {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(Errc::dimension_mismatch, "flow frames differ in size");
    }
    std::vector<Level> pyramid;
    pyramid.push_back({imgproc::gaussian_blur(scaled_255(a), params_.presmooth_sigma),
                       imgproc::gaussian_blur(scaled_255(b), params_.presmooth_sigma)});
    for (int l = 1; l < params_.levels; ++l) {
        const Level& prev = pyramid.back();
        if (std::min(prev.a.width(), prev.a.height()) * params_.scale < 8.0) {
            break;
        }
        pyramid.push_back({imgproc::downscale(prev.a, params_.scale), imgproc::downscale(prev.b, params_.scale)});
    }

    FlowField flow(pyramid.back().a.width(), pyramid.back().a.height());
    for (auto level = pyramid.rbegin(); level != pyramid.rend(); ++level) {
        if (flow.width != level->a.width() || flow.height != level->a.height()) {
            flow = upsample(flow, level->a.width(), level->a.height());
        }
        refine_level(level->a, level->b, flow, params_);
    }
    flow.source_index = a.index();
    flow.target_index = b.index();
    return flow;
}

ImportedFlow::ImportedFlow(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) {
        throw Error(Errc::missing_path, "missing flow directory: " + dir_.string());
    }
}

std::string ImportedFlow::filename(int source, int target) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "flow_%06d_%06d.tkr", source, target);
    return buf;
}

FlowField ImportedFlow::compute(const Frame& a, const Frame& b) const {
    FlowField f = read_flow(dir_ / filename(a.index(), b.index()));
    if (f.width != a.width() || f.height != a.height()) {
        throw Error(Errc::dimension_mismatch, "imported flow does not match frame size");
    }
    f.source_index = a.index();
    f.target_index = b.index();
    return f;
}

std::string ImportedFlow::digest() const { return "imported;" + dir_.string(); }

FlowField compute_flow(const Frame& a, const Frame& b, const FlowParams& params) {
    return PyramidalFlow(params).compute(a, b);
}

Frame flow_magnitude(const FlowField& f) {
    Frame out(f.width, f.height, 1);
    auto dst = out.samples();
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        dst[i] = std::sqrt(f.u[i] * f.u[i] + f.v[i] * f.v[i]);
    }
    return out;
}

void write_flow(const FlowField& f, const std::filesystem::path& path) {
    Frame uv(f.width, f.height, 2, 0.0f, f.source_index);
    auto dst = uv.samples();
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        dst[2 * i] = f.u[i];
        dst[2 * i + 1] = f.v[i];
    }
    io::write_raw(uv, path);
}

FlowField read_flow(const std::filesystem::path& path) {
    const auto frames = io::read_raw(path);
    if (frames.size() != 1 || frames[0].channels() != 2) {
        throw Error(Errc::unsupported_format, "flow container must hold one two-channel frame: " + path.string());
    }
    const Frame& uv = frames[0];
    FlowField f(uv.width(), uv.height());
    auto src = uv.samples();
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        f.u[i] = src[2 * i];
        f.v[i] = src[2 * i + 1];
    }
    return f;
}

}  // namespace turbkit::flow
