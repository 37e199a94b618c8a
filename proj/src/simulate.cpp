#include "turbkit/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "turbkit/imgproc.hpp"
#include "turbkit/io.hpp"
#include "turbkit/parallel.hpp"

namespace turbkit::simulate {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Uniform double in [0, 1) from 53 high bits.
double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

constexpr std::uint64_t tilt_y_salt = 0x5DEECE66Dull;
constexpr std::uint64_t blur_salt = 0xB5297A4Dull;

void scale_to_amplitude(noise::NoiseVolume& v, double amplitude) {
    const float peak = noise::max_abs(v);
    if (amplitude <= 0.0 || peak <= 0.0f) {
        std::fill(v.values.begin(), v.values.end(), 0.0f);
        return;
    }
    const double k = amplitude / static_cast<double>(peak);
    for (float& x : v.values) {
        x = static_cast<float>(x * k);
    }
}

Frame plane_from(const float* data, int w, int h) {
    return Frame(w, h, 1, std::vector<float>(data, data + static_cast<std::size_t>(w) * h));
}

}  // namespace

void TurbulenceParams::validate() const {
    if (tilt_amplitude < 0.0 || blur_sigma_max < 0.0 || blur_perlin_weight < 0.0 || blur_tilt_weight < 0.0) {
        throw Error(Errc::invalid_argument, "turbulence magnitudes must be non-negative");
    }
    if (tilt_amplitude > 0.0 &&
        (tilt_frequency < min_tilt_frequency - 1e-12 || tilt_frequency > max_tilt_frequency + 1e-12)) {
        throw Error(Errc::invalid_argument, "tilt frequency must lie in [0.015, 0.06]");
    }
    if (tilt_amplitude > 0.0 && tilt_octaves < 1) {
        throw Error(Errc::invalid_argument, "tilt needs at least one octave");
    }
    if (blur_sigma_max > 0.0 && (blur_levels < 2 || blur_octaves < 1)) {
        throw Error(Errc::invalid_argument, "blur needs at least two levels and one octave");
    }
}

std::pair<noise::NoiseVolume, noise::NoiseVolume> generate_tilt_volumes(const TurbulenceParams& params, int height,
                                                                          int width, int frames, unsigned workers) {
    params.validate();
    if (height < 1 || width < 1 || frames < 1) {
        throw Error(Errc::invalid_argument, "tilt volume dimensions must be positive");
    }
    if (params.tilt_amplitude <= 0.0) {
        noise::NoiseVolume zero;
        zero.width = width;
        zero.height = height;
        zero.depth = frames;
        zero.octaves = params.tilt_octaves;
        zero.base_frequency = params.tilt_frequency;
        zero.amplitudes = noise::geometric_amplitudes(params.tilt_octaves, params.tilt_persistence);
        zero.values.assign(static_cast<std::size_t>(width) * height * frames, 0.0f);
        return {zero, zero};
    }
    noise::FractalSpec spec;
    spec.base_frequency = params.tilt_frequency;
    spec.amplitudes = noise::geometric_amplitudes(params.tilt_octaves, params.tilt_persistence);
    spec.temporal_scale = params.temporal_scale;
    spec.basis = noise::Basis::simplex;
    spec.seed = params.seed;
    noise::NoiseVolume nx = noise::fractal_volume(width, height, frames, spec, workers);
    spec.seed = splitmix64(params.seed ^ tilt_y_salt);
    noise::NoiseVolume ny = noise::fractal_volume(width, height, frames, spec, workers);
    scale_to_amplitude(nx, params.tilt_amplitude);
    scale_to_amplitude(ny, params.tilt_amplitude);
    return {std::move(nx), std::move(ny)};
}

Frame warp_frame(const Frame& frame, const float* dx, const float* dy) {
    const int w = frame.width();
    const int h = frame.height();
    Frame out(w, h, frame.channels(), 0.0f, frame.index());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const float sx = static_cast<float>(x) + dx[i];
            const float sy = static_cast<float>(y) + dy[i];
            for (int c = 0; c < frame.channels(); ++c) {
                out.at(x, y, c) = imgproc::sample_bilinear(frame, sx, sy, c);
            }
        }
    }
    return out;
}

Frame warp_frame(const Frame& frame, const Frame& dx, const Frame& dy) {
    if (dx.width() != frame.width() || dx.height() != frame.height() || dy.width() != frame.width() ||
        dy.height() != frame.height()) {
        throw Error(Errc::dimension_mismatch, "displacement maps do not match the frame");
    }
    return warp_frame(frame, dx.samples().data(), dy.samples().data());
}

Frame apply_adaptive_blur(const Frame& frame, const Frame& blur_map, int levels, std::optional<double> sigma_top) {
    if (blur_map.width() != frame.width() || blur_map.height() != frame.height() || blur_map.channels() != 1) {
        throw Error(Errc::dimension_mismatch, "blur map does not match the frame");
    }
    if (levels < 2) {
        throw Error(Errc::invalid_argument, "adaptive blur needs at least two levels");
    }
    double top = 0.0;
    if (sigma_top) {
        top = *sigma_top;
    } else {
        for (float s : blur_map.samples()) {
            top = std::max(top, static_cast<double>(s));
        }
    }
    if (!(top > 0.0)) {
        return frame;
    }

    const int last = levels - 1;
    std::vector<std::optional<Frame>> bank(static_cast<std::size_t>(levels));
    auto level = [&](int j) -> const Frame& {
        auto& slot = bank[static_cast<std::size_t>(j)];
        if (!slot) {
            slot = j == 0 ? frame : imgproc::gaussian_blur(frame, top * j / last);
        }
        return *slot;
    };

    Frame out(frame.width(), frame.height(), frame.channels(), 0.0f, frame.index());
    const int nc = frame.channels();
    auto map = blur_map.samples();
    auto dst = out.samples();
    for (std::size_t p = 0; p < map.size(); ++p) {
        const double pos = std::clamp(static_cast<double>(map[p]) / top * last, 0.0, static_cast<double>(last));
        const int j0 = std::min(static_cast<int>(pos), last);
        const float t = static_cast<float>(pos - j0);
        const Frame& a = level(j0);
        if (t == 0.0f) {
            for (int c = 0; c < nc; ++c) {
                dst[p * nc + c] = a.samples()[p * nc + c];
            }
            continue;
        }
        const Frame& b = level(j0 + 1);
        for (int c = 0; c < nc; ++c) {
            const float va = a.samples()[p * nc + c];
            const float vb = b.samples()[p * nc + c];
            dst[p * nc + c] = va + t * (vb - va);
        }
    }
    return out;
}

SimulationResult simulate_sequence(const VideoSequence& clean, const TurbulenceParams& params, unsigned workers) {
    params.validate();
    if (clean.empty()) {
        throw Error(Errc::empty_sequence, "cannot simulate an empty sequence");
    }
    const int w = clean.width();
    const int h = clean.height();
    const int frames = static_cast<int>(clean.size());
    const std::size_t slice = static_cast<std::size_t>(w) * h;

    auto [nx, ny] = generate_tilt_volumes(params, h, w, frames, workers);

    noise::NoiseVolume sigma;
    sigma.width = w;
    sigma.height = h;
    sigma.depth = frames;
    sigma.values.assign(slice * frames, 0.0f);
    if (params.blur_sigma_max > 0.0) {
        noise::FractalSpec spec;
        spec.base_frequency = params.blur_frequency;
        spec.amplitudes = noise::geometric_amplitudes(params.blur_octaves, 0.25);
        spec.temporal_scale = params.temporal_scale;
        spec.basis = noise::Basis::perlin;
        spec.seed = splitmix64(params.seed ^ blur_salt);
        const noise::NoiseVolume perlin = noise::fractal_volume(w, h, frames, spec, workers);
        sigma.octaves = perlin.octaves;
        sigma.base_frequency = perlin.base_frequency;
        sigma.amplitudes = perlin.amplitudes;

        const auto [lo, hi] = std::minmax_element(perlin.values.begin(), perlin.values.end());
        const float prange = *hi - *lo;
        float tilt_peak = 0.0f;
        for (std::size_t i = 0; i < nx.values.size(); ++i) {
            tilt_peak = std::max(tilt_peak, std::hypot(nx.values[i], ny.values[i]));
        }
        for (std::size_t i = 0; i < sigma.values.size(); ++i) {
            const double pn = prange > 0.0f ? (perlin.values[i] - *lo) / prange : 0.0;
            const double tn = tilt_peak > 0.0f ? std::hypot(nx.values[i], ny.values[i]) / tilt_peak : 0.0;
            const double mix = params.blur_perlin_weight * pn + params.blur_tilt_weight * tn;
            sigma.values[i] = static_cast<float>(params.blur_sigma_max * std::clamp(mix, 0.0, 1.0));
        }
    }

    std::vector<Frame> out(clean.size());
    parallel_for(
        0, frames,
        [&](std::ptrdiff_t t) {
            Frame warped = params.tilt_amplitude > 0.0 ? warp_frame(clean[t], nx.slice(static_cast<int>(t)),
                                                                    ny.slice(static_cast<int>(t)))
                                                       : clean[t];
            if (params.blur_sigma_max > 0.0) {
                const Frame map = plane_from(sigma.slice(static_cast<int>(t)), w, h);
                warped = apply_adaptive_blur(warped, map, params.blur_levels, params.blur_sigma_max);
            }
            warped.set_index(static_cast<int>(t));
            out[t] = std::move(warped);
        },
        workers);

    SimulationResult result{VideoSequence(std::move(out), clean.frame_rate()), {}};
    result.truth.tilt_x = std::move(nx);
    result.truth.tilt_y = std::move(ny);
    result.truth.blur_sigma = std::move(sigma);
    return result;
}

void write_volume(const noise::NoiseVolume& volume, const fs::path& path) {
    std::vector<Frame> slices;
    slices.reserve(volume.depth);
    for (int t = 0; t < volume.depth; ++t) {
        slices.push_back(plane_from(volume.slice(t), volume.width, volume.height));
    }
    io::write_raw(slices, path);
}

noise::NoiseVolume read_volume(const fs::path& path) {
    const auto slices = io::read_raw(path);
    noise::NoiseVolume v;
    if (slices.empty()) {
        return v;
    }
    v.width = slices[0].width();
    v.height = slices[0].height();
    v.depth = static_cast<int>(slices.size());
    for (const Frame& s : slices) {
        if (s.channels() != 1) {
            throw Error(Errc::unsupported_format, "noise volume slices must be single-channel");
        }
        v.values.insert(v.values.end(), s.samples().begin(), s.samples().end());
    }
    return v;
}

Frame grid_target(int width, int height, int spacing, int thickness) {
    if (width < 1 || height < 1 || spacing < 1 || thickness < 1) {
        throw Error(Errc::invalid_argument, "invalid grid target geometry");
    }
    Frame out(width, height, 1, 0.85f);
    const int offset = spacing / 2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const bool on_x = (x - offset + spacing) % spacing < thickness && x >= offset;
            const bool on_y = (y - offset + spacing) % spacing < thickness && y >= offset;
            if (on_x || on_y) {
                out.at(x, y) = 0.15f;
            }
        }
    }
    return out;
}

Frame textured_scene(int width, int height, std::uint64_t seed) {
    noise::FractalSpec spec;
    spec.base_frequency = 1.0 / 48.0;
    spec.amplitudes = noise::geometric_amplitudes(5, 0.3);
    spec.basis = noise::Basis::perlin;
    spec.seed = seed;
    const noise::NoiseVolume v = noise::fractal_volume(width, height, 1, spec, 1);
    const auto [lo, hi] = std::minmax_element(v.values.begin(), v.values.end());
    const float range = *hi - *lo;
    Frame out(width, height, 1);
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        out.samples()[i] = range > 0.0f ? 0.1f + 0.8f * (v.values[i] - *lo) / range : 0.5f;
    }
    return out;
}

TurbulenceParams params_for_severity(double severity, std::uint64_t seed) {
    const double s = std::clamp(severity, 0.0, 1.0);
    TurbulenceParams p;
    p.tilt_amplitude = 0.5 + 5.5 * s;
    p.tilt_frequency = TurbulenceParams::min_tilt_frequency +
                       s * (TurbulenceParams::max_tilt_frequency - TurbulenceParams::min_tilt_frequency);
    p.blur_sigma_max = 0.3 + 1.7 * s;
    p.seed = seed;
    return p;
}

std::uint64_t clip_seed(std::uint64_t master_seed, int clip_id) {
    return splitmix64(splitmix64(master_seed) + static_cast<std::uint64_t>(clip_id));
}

namespace {

nlohmann::ordered_json params_json(const TurbulenceParams& p) {
    nlohmann::ordered_json j;
    j["tilt_octaves"] = p.tilt_octaves;
    j["tilt_frequency"] = p.tilt_frequency;
    j["tilt_persistence"] = p.tilt_persistence;
    j["tilt_amplitude"] = p.tilt_amplitude;
    j["temporal_scale"] = p.temporal_scale;
    j["blur_levels"] = p.blur_levels;
    j["blur_sigma_max"] = p.blur_sigma_max;
    j["blur_frequency"] = p.blur_frequency;
    j["blur_octaves"] = p.blur_octaves;
    j["blur_perlin_weight"] = p.blur_perlin_weight;
    j["blur_tilt_weight"] = p.blur_tilt_weight;
    j["seed"] = p.seed;
    return j;
}

Frame clean_source(const Frame& image, int width, int height, std::uint64_t bits) {
    // Scale so the image covers the clip, then crop at a seed-derived offset.
    const double scale = std::max(static_cast<double>(width) / image.width(), static_cast<double>(height) / image.height());
    Frame covered = image;
    if (scale > 1.0) {
        covered = imgproc::resize_bilinear(image, static_cast<int>(std::ceil(image.width() * scale)),
                                           static_cast<int>(std::ceil(image.height() * scale)));
    }
    const int ox = static_cast<int>((bits & 0xFFFFFFFFull) % static_cast<std::uint64_t>(covered.width() - width + 1));
    const int oy = static_cast<int>((bits >> 32) % static_cast<std::uint64_t>(covered.height() - height + 1));
    Frame out(width, height, covered.channels());
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < covered.channels(); ++c) {
                out.at(x, y, c) = covered.at(x + ox, y + oy, c);
            }
        }
    }
    return out;
}

}  // namespace

std::string DatasetManifest::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const ClipRecord& c : clips) {
        nlohmann::ordered_json j;
        j["clip_id"] = c.clip_id;
        j["seed"] = c.seed;
        j["severity"] = c.severity;
        j["params"] = params_json(c.params);
        j["source"] = c.source;
        j["clean_path"] = c.clean_path;
        j["degraded_path"] = c.degraded_path;
        j["tilt_x_path"] = c.tilt_x_path;
        j["tilt_y_path"] = c.tilt_y_path;
        j["blur_path"] = c.blur_path;
        if (!c.error.empty()) {
            j["error"] = c.error;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

DatasetManifest generate_dataset(const fs::path& source_dir, const fs::path& out_dir, const DatasetOptions& options) {
    DatasetManifest manifest;
    if (options.count <= 0) {
        return manifest;
    }
    if (options.width < 1 || options.height < 1 || options.frames < 1 ||
        options.severity_max < options.severity_min) {
        throw Error(Errc::invalid_argument, "invalid dataset options");
    }
    if (!fs::is_directory(source_dir)) {
        throw Error(Errc::missing_path, "missing source directory: " + source_dir.string());
    }
    std::vector<fs::path> sources;
    for (const auto& entry : fs::directory_iterator(source_dir)) {
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && ext == ".png") {
            sources.push_back(entry.path());
        }
    }
    std::sort(sources.begin(), sources.end());
    if (sources.empty()) {
        throw Error(Errc::no_frames, "no source images found in " + source_dir.string());
    }
    fs::create_directories(out_dir);

    manifest.clips.resize(static_cast<std::size_t>(options.count));
    parallel_for(
        0, options.count,
        [&](std::ptrdiff_t id) {
            const auto start = std::chrono::steady_clock::now();
            ClipRecord& rec = manifest.clips[id];
            rec.clip_id = static_cast<int>(id);
            rec.seed = clip_seed(options.master_seed, rec.clip_id);
            const std::uint64_t r1 = splitmix64(rec.seed ^ 1);
            const std::uint64_t r2 = splitmix64(rec.seed ^ 2);
            const std::uint64_t r3 = splitmix64(rec.seed ^ 3);
            rec.severity = options.severity_min + unit_double(r1) * (options.severity_max - options.severity_min);
            rec.params = params_for_severity(rec.severity, rec.seed);
            const fs::path& src = sources[r2 % sources.size()];
            rec.source = src.filename().string();

            char name[32];
            std::snprintf(name, sizeof(name), "clip_%06d", rec.clip_id);
            const fs::path rel(name);
            rec.clean_path = (rel / "clean").generic_string();
            rec.degraded_path = (rel / "degraded").generic_string();
            rec.tilt_x_path = (rel / "tilt_x.tkr").generic_string();
            rec.tilt_y_path = (rel / "tilt_y.tkr").generic_string();
            rec.blur_path = (rel / "blur_sigma.tkr").generic_string();
            try {
                const Frame image = io::read_png(src, ColorMode::rgb);
                const Frame base = clean_source(image, options.width, options.height, r3);
                std::vector<Frame> frames(static_cast<std::size_t>(options.frames), base);
                const VideoSequence clean(std::move(frames));
                // Clips already run in parallel; keep each simulation single-threaded.
                const SimulationResult sim = simulate_sequence(clean, rec.params, 1);
                io::save_sequence(clean, out_dir / rec.clean_path);
                io::save_sequence(sim.degraded, out_dir / rec.degraded_path);
                write_volume(sim.truth.tilt_x, out_dir / rec.tilt_x_path);
                write_volume(sim.truth.tilt_y, out_dir / rec.tilt_y_path);
                write_volume(sim.truth.blur_sigma, out_dir / rec.blur_path);
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        },
        options.workers);

    std::FILE* f = std::fopen((out_dir / "manifest.json").c_str(), "wb");
    if (!f) {
        throw Error(Errc::io_failure, "cannot write manifest in " + out_dir.string());
    }
    const std::string text = manifest.to_json();
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
    return manifest;
}

}  // namespace turbkit::simulate
