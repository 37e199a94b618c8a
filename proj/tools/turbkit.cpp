// turbkit command-line front end.
//
// Exit codes: 0 success, 2 configuration or argument error, 3 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "turbkit/flow.hpp"
#include "turbkit/io.hpp"
#include "turbkit/metrics.hpp"
#include "turbkit/parallel.hpp"
#include "turbkit/pipeline.hpp"
#include "turbkit/segment.hpp"
#include "turbkit/simulate.hpp"
#include "turbkit/stabilize.hpp"
#include "turbkit/stackblend.hpp"
#include "turbkit/turbstats.hpp"

namespace fs = std::filesystem;
using namespace turbkit;

namespace {

constexpr int exit_config = 2;
constexpr int exit_stage = 3;

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io_failure, "cannot write " + path.string());
    }
    out << text;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text(path, text);
    }
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw Error(Errc::config, "not an integer list: " + text);
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw Error(Errc::config, "empty integer list");
    }
    return out;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

ColorMode color_of(const std::string& s) {
    if (s == "rgb") return ColorMode::rgb;
    if (s == "luma") return ColorMode::luma;
    throw Error(Errc::config, "color must be rgb or luma");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"turbkit: turbulence video restoration toolkit"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "worker threads (0 = all cores)");

    // run
    auto* run = app.add_subcommand("run", "full restoration pipeline");
    std::string run_config, run_input, run_output;
    bool run_dump = false;
    run->add_option("--config", run_config, "pipeline TOML");
    run->add_option("--input", run_input, "frame directory or raw container");
    run->add_option("--output", run_output, "output directory");
    run->add_flag("--dump-config", run_dump, "print the effective configuration and exit");

    // stabilize
    auto* stab = app.add_subcommand("stabilize", "global translation by cross-correlation");
    std::string stab_input, stab_output, stab_offsets;
    int stab_border = stabilize::default_crop_border;
    std::string stab_color = "rgb";
    stab->add_option("--input", stab_input)->required();
    stab->add_option("--output", stab_output, "directory for stabilized frames");
    stab->add_option("--offsets", stab_offsets, "CSV file (frame,dx,dy); stdout when omitted");
    stab->add_option("--border", stab_border, "crop border N (search range +-N)");
    stab->add_option("--color", stab_color);

    // flow
    auto* fl = app.add_subcommand("flow", "dense optical flow between two frames");
    std::string fl_input, fl_output, fl_mag;
    std::vector<int> fl_pair;
    fl->add_option("--input", fl_input)->required();
    fl->add_option("--pair", fl_pair, "source and target frame")->expected(2)->required();
    fl->add_option("--output", fl_output, "raw flow container (u, v)");
    fl->add_option("--magnitude", fl_mag, "PNG of the magnitude scaled to its maximum");

    // segment
    auto* seg = app.add_subcommand("segment", "AOF motion segmentation");
    std::string seg_input, seg_output, seg_cands = "2,4,8,16,32";
    float seg_threshold = 0.5f;
    int seg_frame = -1;
    seg->add_option("--input", seg_input)->required();
    seg->add_option("--output", seg_output, "mask directory")->required();
    seg->add_option("--threshold", seg_threshold);
    seg->add_option("--candidates", seg_cands, "comma separated N candidates");
    seg->add_option("--frame", seg_frame, "segment a single frame");

    // cn2
    auto* cn = app.add_subcommand("cn2", "turbulence strength estimate (JSON)");
    std::string cn_input, cn_output, cn_mask;
    double pfov = 0, aperture = 0, distance = 0, tp = 0;
    turbstats::WindowCalibration cal;
    cn->add_option("--input", cn_input)->required();
    cn->add_option("--output", cn_output, "JSON file; stdout when omitted");
    cn->add_option("--background", cn_mask, "mask PNG, white = use pixel");
    cn->add_option("--pfov", pfov);
    cn->add_option("--aperture", aperture);
    cn->add_option("--distance", distance);
    cn->add_option("--turbulence-p", tp);
    cn->add_option("--cn2-low", cal.cn2_low);
    cn->add_option("--cn2-high", cal.cn2_high);
    cn->add_option("--sigma-min", cal.sigma_min);
    cn->add_option("--sigma-max", cal.sigma_max);

    // restore-bg
    auto* rb = app.add_subcommand("restore-bg", "temporal stacking with foreground blending");
    std::string rb_input, rb_output, rb_masks, rb_sigma = "auto", rb_blend = "poisson";
    rb->add_option("--input", rb_input)->required();
    rb->add_option("--output", rb_output)->required();
    rb->add_option("--masks", rb_masks, "per-frame foreground masks");
    rb->add_option("--sigma", rb_sigma, "auto or a window sigma in frames");
    rb->add_option("--blend", rb_blend, "poisson or pyramid");

    // simulate
    auto* sim = app.add_subcommand("simulate", "apply synthetic tilt and blur");
    std::string sim_input, sim_output, sim_truth;
    int sim_frames = 16;
    simulate::TurbulenceParams sp;
    sim->add_option("--input", sim_input, "frame directory, raw container or single PNG")->required();
    sim->add_option("--output", sim_output)->required();
    sim->add_option("--truth", sim_truth, "directory for tilt and blur volumes");
    sim->add_option("--frames", sim_frames, "frame count when the input is a single image");
    sim->add_option("--amplitude", sp.tilt_amplitude);
    sim->add_option("--frequency", sp.tilt_frequency);
    sim->add_option("--octaves", sp.tilt_octaves);
    sim->add_option("--persistence", sp.tilt_persistence);
    sim->add_option("--temporal-scale", sp.temporal_scale);
    sim->add_option("--blur", sp.blur_sigma_max);
    sim->add_option("--blur-levels", sp.blur_levels);
    sim->add_option("--seed", sp.seed);

    // gen-dataset
    auto* gd = app.add_subcommand("gen-dataset", "batch synthetic dataset");
    std::string gd_source, gd_output;
    simulate::DatasetOptions dopt;
    gd->add_option("--source", gd_source, "directory of PNG images")->required();
    gd->add_option("--output", gd_output)->required();
    gd->add_option("--count", dopt.count)->required();
    gd->add_option("--seed", dopt.master_seed);
    gd->add_option("--width", dopt.width);
    gd->add_option("--height", dopt.height);
    gd->add_option("--frames", dopt.frames);
    gd->add_option("--severity-min", dopt.severity_min);
    gd->add_option("--severity-max", dopt.severity_max);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "quality metrics");
    std::string ev_metrics = "psnr,ssim", ev_input, ev_ref, ev_pred, ev_truth, ev_csv, ev_json;
    int ev_window = 10;
    ev->add_option("--metrics", ev_metrics, "subset of psnr,ssim,iou,linedev");
    ev->add_option("--input", ev_input, "restored frames");
    ev->add_option("--reference", ev_ref, "ground-truth frames (psnr, ssim)");
    ev->add_option("--pred-masks", ev_pred);
    ev->add_option("--truth-masks", ev_truth);
    ev->add_option("--window", ev_window, "rolling window for linedev");
    ev->add_option("--csv", ev_csv);
    ev->add_option("--json", ev_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    int config_stage = 0;  // set while arguments are still being validated
    try {
        config_stage = 1;
        if (run->parsed()) {
            pipeline::PipelineConfig cfg;
            if (!run_config.empty()) {
                cfg = pipeline::PipelineConfig::from_toml_file(run_config);
            }
            if (workers) cfg.workers = workers;
            cfg.validate();
            if (run_dump) {
                std::cout << cfg.to_toml();
                return 0;
            }
            if (run_input.empty() || run_output.empty()) {
                throw Error(Errc::config, "run needs --input and --output");
            }
            config_stage = 0;
            const auto result = pipeline::run_from_disk(run_input, run_output, cfg);
            std::cerr << result.latency.to_table();
            return 0;
        }
        if (stab->parsed()) {
            const ColorMode mode = color_of(stab_color);
            config_stage = 0;
            const VideoSequence seq = io::load_sequence(stab_input, mode);
            const auto res = stabilize::stabilize(seq, stab_border, workers);
            std::ostringstream csv;
            csv << "frame,dx,dy\n";
            for (std::size_t i = 0; i < res.offsets.size(); ++i) {
                csv << i << "," << res.offsets[i].dx << "," << res.offsets[i].dy << "\n";
            }
            emit(csv.str(), stab_offsets);
            if (!stab_output.empty()) {
                io::save_sequence(res.stabilized, stab_output);
            }
            return 0;
        }
        if (fl->parsed()) {
            config_stage = 0;
            const VideoSequence seq = to_luma(io::load_sequence(fl_input, ColorMode::luma));
            const int n = static_cast<int>(seq.size());
            if (fl_pair[0] < 0 || fl_pair[0] >= n || fl_pair[1] < 0 || fl_pair[1] >= n) {
                throw Error(Errc::out_of_range, "frame pair out of range");
            }
            const auto field = flow::compute_flow(seq[fl_pair[0]], seq[fl_pair[1]]);
            if (!fl_output.empty()) {
                flow::write_flow(field, fl_output);
            }
            const Frame mag = flow::flow_magnitude(field);
            double mean = 0.0, peak = 0.0;
            for (float v : mag.samples()) {
                mean += v;
                peak = std::max(peak, static_cast<double>(v));
            }
            mean /= static_cast<double>(mag.pixel_count());
            if (!fl_mag.empty()) {
                Frame scaled = mag;
                for (float& v : scaled.samples()) {
                    v = peak > 0.0 ? static_cast<float>(v / peak) : 0.0f;
                }
                io::write_png(scaled, fl_mag);
            }
            std::printf("{\"source\": %d, \"target\": %d, \"mean_magnitude\": %.9g, \"max_magnitude\": %.9g}\n",
                        fl_pair[0], fl_pair[1], mean, peak);
            return 0;
        }
        if (seg->parsed()) {
            const auto candidates = parse_int_list(seg_cands);
            if (!(seg_threshold >= 0.0f && seg_threshold <= 1.0f)) {
                throw Error(Errc::config, "threshold must lie in [0, 1]");
            }
            config_stage = 0;
            const VideoSequence seq = to_luma(io::load_sequence(seg_input, ColorMode::luma));
            const int n = static_cast<int>(seq.size());
            if (n < 2) {
                throw Error(Errc::no_frames, "segmentation needs at least two frames");
            }
            if (seg_frame >= n) {
                throw Error(Errc::out_of_range, "frame out of range");
            }
            flow::FlowCache cache;
            const flow::PyramidalFlow est;
            segment::SegmentParams defaults;
            fs::create_directories(seg_output);
            std::ostringstream csv;
            csv << "frame,n_opt\n";
            const int first = seg_frame >= 0 ? seg_frame : 0;
            const int last = seg_frame >= 0 ? seg_frame : n - 1;
            for (int t = first; t <= last; ++t) {
                const auto sel = segment::select_n_opt(seq, t, candidates, cache, est, workers);
                MotionMask m = segment::threshold_mask(sel.map, seg_threshold, defaults.morphology_radius);
                m.frame_index = t;
                io::write_mask_png(m, fs::path(seg_output) / io::frame_filename(t));
                csv << t << "," << sel.n_opt << "\n";
            }
            write_text(fs::path(seg_output) / "n_opt.csv", csv.str());
            return 0;
        }
        if (cn->parsed()) {
            std::optional<turbstats::OpticalConfig> optics;
            if (pfov > 0 || aperture > 0 || distance > 0 || tp > 0) {
                optics = turbstats::OpticalConfig{pfov, aperture, distance, tp};
                (void)optics->factor();
            }
            if (!(cal.cn2_low > 0 && cal.cn2_high > cal.cn2_low && cal.sigma_min > 0 &&
                  cal.sigma_max >= cal.sigma_min)) {
                throw Error(Errc::config, "invalid window calibration");
            }
            config_stage = 0;
            const VideoSequence seq = to_luma(io::load_sequence(cn_input, ColorMode::luma));
            std::optional<MotionMask> bg;
            if (!cn_mask.empty()) {
                bg = io::read_mask_png(cn_mask);
            }
            auto report = turbstats::estimate_cn2(seq, optics, bg ? &*bg : nullptr);
            report = turbstats::with_window(report, cal);
            emit(turbstats::to_json(report) + "\n", cn_output);
            return 0;
        }
        if (rb->parsed()) {
            std::optional<double> sigma;
            if (rb_sigma != "auto") {
                try {
                    sigma = std::stod(rb_sigma);
                } catch (const std::exception&) {
                    throw Error(Errc::config, "--sigma must be auto or a number");
                }
                if (!(*sigma > 0.0)) {
                    throw Error(Errc::config, "--sigma must be positive");
                }
            }
            stackblend::BlendParams bp;
            if (rb_blend == "poisson") bp.mode = stackblend::BlendMode::poisson;
            else if (rb_blend == "pyramid") bp.mode = stackblend::BlendMode::pyramid;
            else throw Error(Errc::config, "--blend must be poisson or pyramid");
            config_stage = 0;

            const VideoSequence seq = io::load_sequence(rb_input, ColorMode::rgb);
            std::vector<MotionMask> masks;
            if (!rb_masks.empty()) {
                masks = io::load_masks(rb_masks);
                if (masks.size() != seq.size()) {
                    throw Error(Errc::length_mismatch, "mask count differs from frame count");
                }
            }
            double s = sigma.value_or(0.0);
            if (!sigma) {
                MotionMask use(seq.width(), seq.height(), true);
                for (const MotionMask& m : masks) {
                    for (std::size_t i = 0; i < use.labels.size(); ++i) {
                        use.labels[i] = use.labels[i] && !m.labels[i];
                    }
                }
                auto report = turbstats::estimate_cn2(to_luma(seq), std::nullopt, use.any() ? &use : nullptr);
                report = turbstats::with_window(report, turbstats::WindowCalibration{});
                s = report.window_sigma;
                std::cerr << "cn2 " << report.cn2 << ", window sigma " << s << "\n";
            }
            std::vector<Frame> out(seq.size());
            const std::span<const MotionMask> mspan(masks);
            parallel_for(
                0, static_cast<std::ptrdiff_t>(seq.size()),
                [&](std::ptrdiff_t t) {
                    Frame bg = stackblend::gaussian_stack(seq, static_cast<int>(t), s, mspan).frame;
                    if (!masks.empty()) {
                        bg = stackblend::blend_foreground(bg, seq[t], masks[t], bp);
                    }
                    out[t] = std::move(bg);
                },
                workers);
            io::save_sequence(VideoSequence(std::move(out)), rb_output);
            return 0;
        }
        if (sim->parsed()) {
            sp.validate();
            if (sim_frames < 1) {
                throw Error(Errc::config, "--frames must be positive");
            }
            config_stage = 0;
            VideoSequence clean;
            if (fs::is_regular_file(sim_input) && fs::path(sim_input).extension() == ".png") {
                const Frame img = io::read_png(sim_input, ColorMode::rgb);
                clean = VideoSequence(std::vector<Frame>(static_cast<std::size_t>(sim_frames), img));
            } else {
                clean = io::load_sequence(sim_input, ColorMode::rgb);
            }
            const auto result = simulate::simulate_sequence(clean, sp, workers);
            io::save_sequence(result.degraded, sim_output);
            if (!sim_truth.empty()) {
                fs::create_directories(sim_truth);
                simulate::write_volume(result.truth.tilt_x, fs::path(sim_truth) / "tilt_x.tkr");
                simulate::write_volume(result.truth.tilt_y, fs::path(sim_truth) / "tilt_y.tkr");
                simulate::write_volume(result.truth.blur_sigma, fs::path(sim_truth) / "blur_sigma.tkr");
            }
            return 0;
        }
        if (gd->parsed()) {
            dopt.workers = workers;
            if (dopt.count < 0) {
                throw Error(Errc::config, "--count must be >= 0");
            }
            config_stage = 0;
            const auto manifest = simulate::generate_dataset(gd_source, gd_output, dopt);
            int failed = 0;
            for (const auto& c : manifest.clips) {
                if (!c.error.empty()) {
                    ++failed;
                    std::cerr << "clip " << c.clip_id << " failed: " << c.error << "\n";
                }
            }
            std::cerr << manifest.clips.size() - failed << " clips written to " << gd_output << "\n";
            return failed ? exit_stage : 0;
        }
        if (ev->parsed()) {
            const auto metrics = split(ev_metrics);
            for (const auto& m : metrics) {
                if (m != "psnr" && m != "ssim" && m != "iou" && m != "linedev") {
                    throw Error(Errc::config, "unknown metric " + m);
                }
            }
            if (ev_window < 1) {
                throw Error(Errc::config, "--window must be >= 1");
            }
            config_stage = 0;
            VideoSequence restored, reference;
            std::vector<MotionMask> pred, truth;
            const bool need_frames = std::any_of(metrics.begin(), metrics.end(),
                                                 [](const std::string& m) { return m != "iou"; });
            const bool need_ref = std::any_of(metrics.begin(), metrics.end(),
                                              [](const std::string& m) { return m == "psnr" || m == "ssim"; });
            const bool need_masks = std::find(metrics.begin(), metrics.end(), "iou") != metrics.end();
            if (need_frames) restored = io::load_sequence(ev_input, ColorMode::rgb);
            if (need_ref) reference = io::load_sequence(ev_ref, ColorMode::rgb);
            if (need_masks) {
                pred = io::load_masks(ev_pred);
                truth = io::load_masks(ev_truth);
            }
            metrics::EvaluationInputs in;
            in.restored = &restored;
            in.reference = &reference;
            in.predicted_masks = pred;
            in.truth_masks = truth;
            in.rolling_window = ev_window;
            in.workers = workers;
            const auto report = metrics::evaluate(metrics, in);
            if (ev_csv.empty() && ev_json.empty()) {
                std::cout << report.to_csv();
            }
            if (!ev_csv.empty()) emit(report.to_csv(), ev_csv);
            if (!ev_json.empty()) emit(report.to_json() + "\n", ev_json);
            return 0;
        }
    } catch (const pipeline::StageError& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
        return e.code() == Errc::config ? exit_config : exit_stage;
    } catch (const Error& e) {
        std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
        if (e.code() == Errc::config || config_stage) {
            return exit_config;
        }
        return exit_stage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_stage ? exit_config : exit_stage;
    }
    return 0;
}
