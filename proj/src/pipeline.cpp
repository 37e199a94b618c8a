#include "turbkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "turbkit/fft.hpp"
#include "turbkit/flowcache.hpp"
#include "turbkit/imgproc.hpp"
#include "turbkit/io.hpp"
#include "turbkit/parallel.hpp"
#include "turbkit/simulate.hpp"

namespace turbkit::pipeline {

namespace fs = std::filesystem;

// ---- sharpening ----

Frame unsharp_mask(const Frame& frame, double amount, double radius) {
    if (amount < 0.0 || !(radius > 0.0)) {
        throw Error(Errc::invalid_argument, "unsharp needs amount >= 0 and radius > 0");
    }
    if (amount == 0.0) {
        return frame;
    }
    const Frame blurred = imgproc::gaussian_blur(frame, radius);
    Frame out = frame;
    auto dst = out.samples();
    auto src = frame.samples();
    auto low = blurred.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double v = src[i] + amount * (static_cast<double>(src[i]) - low[i]);
        dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

namespace {

int reflect_index(int i, int n) {
    // Half-sample symmetric: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    if (n == 1) {
        return 0;
    }
    const int period = 2 * n;
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - 1 - i;
}

}  // namespace

Frame wiener_deconvolve(const Frame& frame, double psf_sigma, double nsr) {
    if (!(psf_sigma > 0.0) || !(nsr > 0.0)) {
        throw Error(Errc::invalid_argument, "wiener needs psf sigma > 0 and nsr > 0");
    }
    const int w = frame.width();
    const int h = frame.height();
    const auto kernel = imgproc::gaussian_kernel(psf_sigma);
    const int kr = static_cast<int>(kernel.size() / 2);
    const int pad = 2 * kr + 2;
    const int pw = fft::good_size(w + 2 * pad);
    const int ph = fft::good_size(h + 2 * pad);
    const fft::RealPlan2D plan(ph, pw);

    // Transfer function of the separable PSF, centred at the origin with wrap.
    fft::RealBuffer psf = plan.make_real();
    for (int dy = -kr; dy <= kr; ++dy) {
        for (int dx = -kr; dx <= kr; ++dx) {
            const int y = (dy + ph) % ph;
            const int x = (dx + pw) % pw;
            psf[static_cast<std::size_t>(y) * pw + x] =
                static_cast<double>(kernel[dy + kr]) * static_cast<double>(kernel[dx + kr]);
        }
    }
    fft::ComplexBuffer otf = plan.make_complex();
    plan.forward(psf, otf);

    Frame out(w, h, frame.channels(), 0.0f, frame.index());
    const double norm = 1.0 / static_cast<double>(plan.real_size());
    fft::RealBuffer buf = plan.make_real();
    fft::ComplexBuffer spec = plan.make_complex();
    for (int c = 0; c < frame.channels(); ++c) {
        for (int y = 0; y < ph; ++y) {
            const int sy = reflect_index(y - pad, h);
            for (int x = 0; x < pw; ++x) {
                buf[static_cast<std::size_t>(y) * pw + x] = frame.at(reflect_index(x - pad, w), sy, c);
            }
        }
        plan.forward(buf, spec);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            const std::complex<double> hk = otf[i];
            spec[i] *= std::conj(hk) / (std::norm(hk) + nsr);
        }
        plan.inverse(spec, buf);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double v = buf[static_cast<std::size_t>(y + pad) * pw + x + pad] * norm;
                out.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

Frame sharpen(const Frame& frame, const SharpenParams& params) {
    switch (params.method) {
    case SharpenMethod::none: return frame;
    case SharpenMethod::unsharp: return unsharp_mask(frame, params.amount, params.radius);
    case SharpenMethod::wiener: return wiener_deconvolve(frame, params.psf_sigma, params.nsr);
    case SharpenMethod::external: break;
    }
    throw Error(Errc::invalid_argument, "external sharpening runs on whole sequences");
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace

VideoSequence sharpen_external(const VideoSequence& seq, const std::string& command, const fs::path& workdir) {
    if (command.empty()) {
        throw Error(Errc::invalid_argument, "external sharpener command is empty");
    }
    fs::create_directories(workdir);
    const fs::path in = workdir / "sharpen_in.tkr";
    const fs::path out = workdir / "sharpen_out.tkr";
    io::write_raw(seq.frames(), in);
    std::error_code ec;
    fs::remove(out, ec);
    const std::string cmd = command + " " + shell_quote(in.string()) + " " + shell_quote(out.string());
    const int status = std::system(cmd.c_str());
    if (status != 0) {
        throw Error(Errc::io_failure, "external sharpener exited with status " + std::to_string(status));
    }
    auto frames = io::read_raw(out);
    if (frames.size() != seq.size()) {
        throw Error(Errc::length_mismatch, "external sharpener returned a different frame count");
    }
    for (const Frame& f : frames) {
        if (!f.same_shape(seq[0])) {
            throw Error(Errc::dimension_mismatch, "external sharpener changed the frame shape");
        }
    }
    fs::remove(in, ec);
    fs::remove(out, ec);
    return VideoSequence(std::move(frames), seq.frame_rate());
}

// ---- configuration ----

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::config, what); };
    if (version != 1) fail("unsupported config version " + std::to_string(version));
    if (stabilizer_border < 0) fail("stabilize.border must be >= 0");
    if (flow.levels < 1 || !(flow.scale > 0.0 && flow.scale < 1.0) || flow.iterations < 1 || flow.warps < 1 ||
        !(flow.smoothness > 0.0) || flow.presmooth_sigma < 0.0) {
        fail("invalid [flow] parameters");
    }
    if (flow_cache_capacity < 1) fail("flow.cache_capacity must be >= 1");
    if (!(segmentation.threshold >= 0.0f && segmentation.threshold <= 1.0f)) fail("segment.threshold must be in [0, 1]");
    if (segmentation.candidates.empty()) fail("segment.candidates is empty");
    for (int n : segmentation.candidates) {
        if (n < 1) fail("segment.candidates must be positive");
    }
    if (segmentation.morphology_radius < 0) fail("segment.morphology_radius must be >= 0");
    if (!(calibration.cn2_low > 0.0) || !(calibration.cn2_high > calibration.cn2_low)) {
        fail("cn2 calibration needs 0 < cn2_low < cn2_high");
    }
    if (!(calibration.sigma_min > 0.0) || calibration.sigma_max < calibration.sigma_min) {
        fail("cn2 calibration needs 0 < sigma_min <= sigma_max");
    }
    if (optics && !(optics->pfov > 0.0 && optics->aperture_d > 0.0 && optics->distance_l > 0.0 &&
                    optics->turbulence_p > 0.0)) {
        fail("optics values must be positive");
    }
    if (stack_sigma && !(*stack_sigma > 0.0)) fail("stack.sigma must be positive");
    if (blend.dilation < 0 || !(blend.tolerance > 0.0) || blend.max_iterations < 1 || blend.pyramid_levels < 1 ||
        blend.sor_omega < 0.0 || blend.sor_omega >= 2.0 || blend.mask_blur_sigma < 0.0) {
        fail("invalid [blend] parameters");
    }
    switch (sharpen.method) {
    case SharpenMethod::unsharp:
        if (sharpen.amount < 0.0 || !(sharpen.radius > 0.0)) fail("unsharp needs amount >= 0 and radius > 0");
        break;
    case SharpenMethod::wiener:
        if (!(sharpen.psf_sigma > 0.0) || !(sharpen.nsr > 0.0)) fail("wiener needs psf_sigma > 0 and nsr > 0");
        break;
    case SharpenMethod::external:
        if (sharpen.command.empty()) fail("external sharpener needs a command");
        break;
    case SharpenMethod::none: break;
    }
    if (report_name.empty()) fail("output.report must not be empty");
}

namespace {

class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!table_) {
            return;
        }
        const toml::node* node = table_->get(key);
        if (!node) {
            return;
        }
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node->value_exact<bool>()) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (auto v = node->value_exact<std::int64_t>()) {
                if (*v < 0 && std::is_unsigned_v<T>) {
                    fail(key, "must be non-negative");
                }
                out = static_cast<T>(*v);
                return;
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (auto v = node->value<double>(); v && (node->is_floating_point() || node->is_integer())) {
                out = static_cast<T>(*v);
                return;
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node->value_exact<std::string>()) {
                out = *v;
                return;
            }
        }
        fail(key, "has the wrong type");
    }

    void get_int_list(const char* key, std::vector<int>& out) {
        seen_.insert(key);
        if (!table_) {
            return;
        }
        const toml::node* node = table_->get(key);
        if (!node) {
            return;
        }
        const toml::array* arr = node->as_array();
        if (!arr) {
            fail(key, "must be an array of integers");
        }
        std::vector<int> values;
        for (const toml::node& e : *arr) {
            auto v = e.value_exact<std::int64_t>();
            if (!v) {
                fail(key, "must be an array of integers");
            }
            values.push_back(static_cast<int>(*v));
        }
        out = std::move(values);
    }

    const toml::node* raw(const char* key) {
        seen_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    void finish() const {
        if (!table_) {
            return;
        }
        for (const auto& [k, v] : *table_) {
            if (!seen_.count(std::string(k.str()))) {
                throw Error(Errc::config, "unknown key '" + std::string(k.str()) + "' in " + where());
            }
        }
    }

private:
    [[noreturn]] void fail(const char* key, const char* what) const {
        throw Error(Errc::config, where() + "." + key + " " + what);
    }
    std::string where() const { return name_.empty() ? "config" : "[" + name_ + "]"; }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> seen_;
};

const toml::table* subtable(const toml::table& root, const char* name) {
    const toml::node* n = root.get(name);
    if (!n) {
        return nullptr;
    }
    if (!n->is_table()) {
        throw Error(Errc::config, std::string("'") + name + "' must be a table");
    }
    return n->as_table();
}

PipelineConfig parse_config(const toml::table& root) {
    PipelineConfig c;
    Section top(&root, "");
    top.get("version", c.version);
    top.get("workers", c.workers);
    for (const char* name : {"stages", "stabilize", "flow", "segment", "cn2", "stack", "blend", "sharpen", "output"}) {
        top.raw(name);
    }
    top.finish();

    Section stages(subtable(root, "stages"), "stages");
    stages.get("stabilize", c.stages.stabilize);
    stages.get("segment", c.stages.segment);
    stages.get("stack", c.stages.stack);
    stages.get("blend", c.stages.blend);
    stages.get("sharpen", c.stages.sharpen);
    stages.finish();

    Section stab(subtable(root, "stabilize"), "stabilize");
    stab.get("border", c.stabilizer_border);
    stab.finish();

    Section fl(subtable(root, "flow"), "flow");
    fl.get("levels", c.flow.levels);
    fl.get("scale", c.flow.scale);
    fl.get("iterations", c.flow.iterations);
    fl.get("warps", c.flow.warps);
    fl.get("smoothness", c.flow.smoothness);
    fl.get("presmooth_sigma", c.flow.presmooth_sigma);
    fl.get("cache_capacity", c.flow_cache_capacity);
    fl.finish();

    Section seg(subtable(root, "segment"), "segment");
    seg.get("threshold", c.segmentation.threshold);
    seg.get_int_list("candidates", c.segmentation.candidates);
    seg.get("morphology_radius", c.segmentation.morphology_radius);
    seg.finish();

    const toml::table* cn2_table = subtable(root, "cn2");
    Section cn2(cn2_table, "cn2");
    cn2.get("cn2_low", c.calibration.cn2_low);
    cn2.get("cn2_high", c.calibration.cn2_high);
    cn2.get("sigma_min", c.calibration.sigma_min);
    cn2.get("sigma_max", c.calibration.sigma_max);
    cn2.raw("optics");
    cn2.finish();
    if (cn2_table) {
        if (const toml::table* optics = subtable(*cn2_table, "optics")) {
            turbstats::OpticalConfig o;
            Section os(optics, "cn2.optics");
            os.get("pfov", o.pfov);
            os.get("aperture_d", o.aperture_d);
            os.get("distance_l", o.distance_l);
            os.get("turbulence_p", o.turbulence_p);
            os.finish();
            c.optics = o;
        }
    }

    Section stack(subtable(root, "stack"), "stack");
    if (const toml::node* s = stack.raw("sigma")) {
        if (auto text = s->value_exact<std::string>()) {
            if (*text != "auto") {
                throw Error(Errc::config, "[stack].sigma must be \"auto\" or a number");
            }
        } else if (s->is_number()) {
            c.stack_sigma = s->value<double>();
        } else {
            throw Error(Errc::config, "[stack].sigma must be \"auto\" or a number");
        }
    }
    stack.finish();

    Section bl(subtable(root, "blend"), "blend");
    std::string mode = "poisson";
    bl.get("mode", mode);
    if (mode == "poisson") {
        c.blend.mode = stackblend::BlendMode::poisson;
    } else if (mode == "pyramid") {
        c.blend.mode = stackblend::BlendMode::pyramid;
    } else {
        throw Error(Errc::config, "[blend].mode must be poisson or pyramid");
    }
    bl.get("dilation", c.blend.dilation);
    bl.get("tolerance", c.blend.tolerance);
    bl.get("max_iterations", c.blend.max_iterations);
    bl.get("sor_omega", c.blend.sor_omega);
    bl.get("pyramid_levels", c.blend.pyramid_levels);
    bl.get("mask_blur_sigma", c.blend.mask_blur_sigma);
    bl.finish();

    Section sh(subtable(root, "sharpen"), "sharpen");
    std::string method = "unsharp";
    sh.get("method", method);
    if (method == "none") c.sharpen.method = SharpenMethod::none;
    else if (method == "unsharp") c.sharpen.method = SharpenMethod::unsharp;
    else if (method == "wiener") c.sharpen.method = SharpenMethod::wiener;
    else if (method == "external") c.sharpen.method = SharpenMethod::external;
    else throw Error(Errc::config, "[sharpen].method must be none, unsharp, wiener or external");
    sh.get("amount", c.sharpen.amount);
    sh.get("radius", c.sharpen.radius);
    sh.get("psf_sigma", c.sharpen.psf_sigma);
    sh.get("nsr", c.sharpen.nsr);
    sh.get("command", c.sharpen.command);
    sh.finish();

    Section out(subtable(root, "output"), "output");
    std::string color = "rgb";
    out.get("color", color);
    if (color == "rgb") c.color = ColorMode::rgb;
    else if (color == "luma") c.color = ColorMode::luma;
    else throw Error(Errc::config, "[output].color must be rgb or luma");
    out.get("masks", c.write_masks);
    out.get("report", c.report_name);
    out.finish();

    c.validate();
    return c;
}

}  // namespace

PipelineConfig PipelineConfig::from_toml_string(const std::string& text) {
    try {
        return parse_config(toml::parse(text));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error: " << e.description() << " at line " << e.source().begin.line;
        throw Error(Errc::config, msg.str());
    }
}

PipelineConfig PipelineConfig::from_toml_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::config, "cannot read config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return from_toml_string(text.str());
}

std::string PipelineConfig::to_toml() const {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        std::string s = buf;
        if (s.find_first_of(".eEn") == std::string::npos) {
            s += ".0";
        }
        return s;
    };
    auto b = [](bool v) { return v ? "true" : "false"; };
    std::ostringstream o;
    o << "version = " << version << "\n";
    o << "workers = " << workers << "\n\n";
    o << "[stages]\n"
      << "stabilize = " << b(stages.stabilize) << "\n"
      << "segment = " << b(stages.segment) << "\n"
      << "stack = " << b(stages.stack) << "\n"
      << "blend = " << b(stages.blend) << "\n"
      << "sharpen = " << b(stages.sharpen) << "\n\n";
    o << "[stabilize]\nborder = " << stabilizer_border << "\n\n";
    o << "[flow]\n"
      << "levels = " << flow.levels << "\n"
      << "scale = " << num(flow.scale) << "\n"
      << "iterations = " << flow.iterations << "\n"
      << "warps = " << flow.warps << "\n"
      << "smoothness = " << num(flow.smoothness) << "\n"
      << "presmooth_sigma = " << num(flow.presmooth_sigma) << "\n"
      << "cache_capacity = " << flow_cache_capacity << "\n\n";
    o << "[segment]\n"
      << "threshold = " << num(segmentation.threshold) << "\n"
      << "candidates = [";
    for (std::size_t i = 0; i < segmentation.candidates.size(); ++i) {
        o << (i ? ", " : "") << segmentation.candidates[i];
    }
    o << "]\n"
      << "morphology_radius = " << segmentation.morphology_radius << "\n\n";
    o << "[cn2]\n"
      << "cn2_low = " << num(calibration.cn2_low) << "\n"
      << "cn2_high = " << num(calibration.cn2_high) << "\n"
      << "sigma_min = " << num(calibration.sigma_min) << "\n"
      << "sigma_max = " << num(calibration.sigma_max) << "\n\n";
    if (optics) {
        o << "[cn2.optics]\n"
          << "pfov = " << num(optics->pfov) << "\n"
          << "aperture_d = " << num(optics->aperture_d) << "\n"
          << "distance_l = " << num(optics->distance_l) << "\n"
          << "turbulence_p = " << num(optics->turbulence_p) << "\n\n";
    }
    o << "[stack]\nsigma = " << (stack_sigma ? num(*stack_sigma) : std::string("\"auto\"")) << "\n\n";
    o << "[blend]\n"
      << "mode = \"" << (blend.mode == stackblend::BlendMode::poisson ? "poisson" : "pyramid") << "\"\n"
      << "dilation = " << blend.dilation << "\n"
      << "tolerance = " << num(blend.tolerance) << "\n"
      << "max_iterations = " << blend.max_iterations << "\n"
      << "sor_omega = " << num(blend.sor_omega) << "\n"
      << "pyramid_levels = " << blend.pyramid_levels << "\n"
      << "mask_blur_sigma = " << num(blend.mask_blur_sigma) << "\n\n";
    const char* method = "unsharp";
    switch (sharpen.method) {
    case SharpenMethod::none: method = "none"; break;
    case SharpenMethod::unsharp: method = "unsharp"; break;
    case SharpenMethod::wiener: method = "wiener"; break;
    case SharpenMethod::external: method = "external"; break;
    }
    o << "[sharpen]\n"
      << "method = \"" << method << "\"\n"
      << "amount = " << num(sharpen.amount) << "\n"
      << "radius = " << num(sharpen.radius) << "\n"
      << "psf_sigma = " << num(sharpen.psf_sigma) << "\n"
      << "nsr = " << num(sharpen.nsr) << "\n"
      << "command = " << toml::value<std::string>(sharpen.command) << "\n\n";
    o << "[output]\n"
      << "color = \"" << (color == ColorMode::rgb ? "rgb" : "luma") << "\"\n"
      << "masks = " << b(write_masks) << "\n"
      << "report = " << toml::value<std::string>(report_name) << "\n";
    return o.str();
}

// ---- latency ----

std::string LatencyReport::to_table() const {
    std::ostringstream o;
    char line[128];
    std::snprintf(line, sizeof(line), "resolution %dx%d, %d frames\n", width, height, frames);
    o << line;
    std::snprintf(line, sizeof(line), "%-12s %14s\n", "stage", "s/frame");
    o << line;
    for (const StageTiming& s : stages) {
        std::snprintf(line, sizeof(line), "%-12s %14.6f\n", s.name.c_str(), s.per_frame);
        o << line;
    }
    std::snprintf(line, sizeof(line), "%-12s %14.6f\n", "total", total_per_frame);
    o << line;
    std::snprintf(line, sizeof(line), "%-12s %14.6f\n", "end-to-end", end_to_end_per_frame);
    o << line;
    return o.str();
}

namespace {

nlohmann::ordered_json latency_json(const LatencyReport& r) {
    nlohmann::ordered_json j;
    j["width"] = r.width;
    j["height"] = r.height;
    j["frames"] = r.frames;
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const StageTiming& s : r.stages) {
        stages.push_back({{"stage", s.name}, {"seconds", s.seconds}, {"per_frame", s.per_frame}});
    }
    j["stages"] = std::move(stages);
    j["total_per_frame"] = r.total_per_frame;
    j["read_seconds"] = r.read_seconds;
    j["write_seconds"] = r.write_seconds;
    j["end_to_end_per_frame"] = r.end_to_end_per_frame;
    j["flow_cache"] = {{"hits", r.flow_cache_hits}, {"misses", r.flow_cache_misses}};
    return j;
}

}  // namespace

std::string LatencyReport::to_json() const { return latency_json(*this).dump(2); }

std::string PipelineResult::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json offs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        offs.push_back({{"frame", i}, {"dx", offsets[i].dx}, {"dy", offsets[i].dy}});
    }
    j["offsets"] = std::move(offs);
    j["n_opt"] = n_opt;
    if (turbulence) {
        j["turbulence"] = nlohmann::ordered_json::parse(turbstats::to_json(*turbulence));
    } else {
        j["turbulence"] = nullptr;
    }
    j["stack_sigma"] = stack_sigma;
    j["latency"] = latency_json(latency);
    return j.dump(2);
}

// ---- run ----

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
double timed(const char* stage, Fn&& fn) {
    const auto t0 = Clock::now();
    try {
        fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    } catch (const std::exception& e) {
        throw StageError(stage, Error(Errc::invalid_argument, e.what()));
    }
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void clamp01(Frame& f) {
    for (float& v : f.samples()) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

}  // namespace

PipelineResult run_pipeline(const VideoSequence& input, const PipelineConfig& config) {
    config.validate();
    if (input.empty()) {
        throw Error(Errc::empty_sequence, "pipeline input has no frames");
    }
    const int n = static_cast<int>(input.size());
    const int w = input.width();
    const int h = input.height();
    const unsigned workers = config.workers;

    PipelineResult result;
    LatencyReport& lat = result.latency;
    lat.width = w;
    lat.height = h;
    lat.frames = n;
    auto record = [&](const char* name, double seconds) {
        lat.stages.push_back({name, seconds, seconds / n});
    };

    VideoSequence current = input;

    if (config.stages.stabilize) {
        record("stabilize", timed("stabilize", [&] {
                   auto st = stabilize::stabilize(current, config.stabilizer_border, workers);
                   result.offsets = std::move(st.offsets);
                   current = std::move(st.stabilized);
               }));
    }

    result.masks.reserve(n);
    for (int t = 0; t < n; ++t) {
        MotionMask m(w, h);
        m.threshold = config.segmentation.threshold;
        m.frame_index = t;
        result.masks.push_back(std::move(m));
    }
    result.n_opt.assign(n, 0);
    bool any_foreground = false;

    if (config.stages.segment) {
        flow::FlowCache cache(config.flow_cache_capacity);
        record("segment", timed("segment", [&] {
                   if (n < 2) {
                       return;
                   }
                   const VideoSequence luma = to_luma(current);
                   const flow::PyramidalFlow estimator(config.flow);
                   for (int t = 0; t < n; ++t) {
                       const auto sel = segment::select_n_opt(luma, t, config.segmentation.candidates, cache,
                                                              estimator, workers);
                       result.n_opt[t] = sel.n_opt;
                       MotionMask m = segment::threshold_mask(sel.map, config.segmentation.threshold,
                                                              config.segmentation.morphology_radius);
                       m.frame_index = t;
                       any_foreground = any_foreground || m.any();
                       result.masks[t] = std::move(m);
                   }
               }));
        lat.flow_cache_hits = cache.hits();
        lat.flow_cache_misses = cache.misses();
    }

    std::vector<Frame> background(current.begin(), current.end());
    if (config.stages.stack) {
        record("stack", timed("stack", [&] {
                   double sigma = config.calibration.sigma_min;
                   if (config.stack_sigma) {
                       sigma = *config.stack_sigma;
                   } else if (n >= 2) {
                       MotionMask bg(w, h, true);
                       for (const MotionMask& m : result.masks) {
                           for (std::size_t i = 0; i < bg.labels.size(); ++i) {
                               bg.labels[i] = bg.labels[i] && !m.labels[i];
                           }
                       }
                       const VideoSequence luma = to_luma(current);
                       try {
                           auto report = turbstats::estimate_cn2(luma, config.optics, bg.any() ? &bg : nullptr);
                           report = turbstats::with_window(report, config.calibration);
                           sigma = report.window_sigma;
                           result.turbulence = report;
                       } catch (const Error& e) {
                           // A constant background carries no turbulence signal.
                           if (e.code() != Errc::degenerate_gradient) {
                               throw;
                           }
                       }
                   }
                   result.stack_sigma = sigma;
                   const std::span<const MotionMask> masks =
                       any_foreground ? std::span<const MotionMask>(result.masks) : std::span<const MotionMask>();
                   parallel_for(
                       0, n,
                       [&](std::ptrdiff_t t) {
                           background[t] = stackblend::gaussian_stack(current, static_cast<int>(t), sigma, masks).frame;
                       },
                       workers);
               }));
    }

    std::vector<Frame> out = std::move(background);
    if (config.stages.blend) {
        record("blend", timed("blend", [&] {
                   parallel_for(
                       0, n,
                       [&](std::ptrdiff_t t) {
                           if (!result.masks[t].any()) {
                               return;
                           }
                           out[t] = stackblend::blend_foreground(out[t], current[t], result.masks[t], config.blend);
                           clamp01(out[t]);
                       },
                       workers);
               }));
    }

    if (config.stages.sharpen) {
        record("sharpen", timed("sharpen", [&] {
                   if (config.sharpen.method == SharpenMethod::external) {
                       const VideoSequence sharp = sharpen_external(
                           VideoSequence(out, input.frame_rate()), config.sharpen.command,
                           fs::temp_directory_path() / ("turbkit_sharpen_" + std::to_string(::getpid())));
                       out = sharp.frames();
                       return;
                   }
                   parallel_for(
                       0, n, [&](std::ptrdiff_t t) { out[t] = sharpen(out[t], config.sharpen); }, workers);
               }));
    }

    result.restored = VideoSequence(std::move(out), input.frame_rate());
    double total = 0.0;
    for (const StageTiming& s : lat.stages) {
        total += s.seconds;
    }
    lat.total_per_frame = total / n;
    lat.end_to_end_per_frame = lat.total_per_frame;
    return result;
}

LatencyReport report_latency(const PipelineResult& run) { return run.latency; }

PipelineResult run_from_disk(const fs::path& input, const fs::path& output_dir, const PipelineConfig& config) {
    config.validate();
    const auto t0 = Clock::now();
    VideoSequence seq;
    try {
        seq = io::load_sequence(input, config.color);
    } catch (const Error& e) {
        throw StageError("read", e);
    }
    const double read = std::chrono::duration<double>(Clock::now() - t0).count();

    PipelineResult result = run_pipeline(seq, config);

    const auto t1 = Clock::now();
    try {
        io::save_sequence(result.restored, output_dir);
        if (config.write_masks && config.stages.segment) {
            fs::create_directories(output_dir / "masks");
            for (const MotionMask& m : result.masks) {
                io::write_mask_png(m, output_dir / "masks" / io::frame_filename(m.frame_index));
            }
        }
    } catch (const Error& e) {
        throw StageError("write", e);
    }
    LatencyReport& lat = result.latency;
    lat.read_seconds = read;
    lat.write_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    lat.end_to_end_per_frame = lat.total_per_frame + (lat.read_seconds + lat.write_seconds) / lat.frames;

    std::ofstream report(output_dir / config.report_name, std::ios::binary);
    if (!report) {
        throw StageError("write", Error(Errc::io_failure, "cannot write report"));
    }
    report << result.to_json() << "\n";
    return result;
}

std::vector<LatencyReport> latency_at_scales(const VideoSequence& input, const PipelineConfig& config,
                                             const std::vector<double>& scales) {
    std::vector<LatencyReport> reports;
    for (double s : scales) {
        if (!(s > 0.0 && s <= 1.0)) {
            throw Error(Errc::invalid_argument, "latency scales must lie in (0, 1]");
        }
        std::vector<Frame> frames;
        for (const Frame& f : input) {
            frames.push_back(s == 1.0 ? f : imgproc::downscale(f, s));
        }
        const VideoSequence scaled(std::move(frames), input.frame_rate());
        PipelineConfig c = config;
        c.stabilizer_border = std::max(1, static_cast<int>(std::lround(config.stabilizer_border * s)));
        reports.push_back(run_pipeline(scaled, c).latency);
    }
    return reports;
}

turbstats::WindowCalibration calibrate_window(const Frame& scene, int frames, std::uint64_t seed,
                                              const turbstats::WindowCalibration& base) {
    if (frames < 2) {
        throw Error(Errc::invalid_argument, "calibration needs at least two frames");
    }
    const VideoSequence clean(std::vector<Frame>(static_cast<std::size_t>(frames), to_luma(scene)));
    auto cn2_at = [&](double severity) {
        const auto sim = simulate::simulate_sequence(clean, simulate::params_for_severity(severity, seed));
        return turbstats::estimate_cn2(sim.degraded).cn2;
    };
    turbstats::WindowCalibration c = base;
    c.cn2_low = cn2_at(0.0);
    c.cn2_high = cn2_at(1.0);
    if (!(c.cn2_low > 0.0) || !(c.cn2_high > c.cn2_low)) {
        throw Error(Errc::invalid_argument, "calibration presets did not separate");
    }
    return c;
}

}  // namespace turbkit::pipeline
