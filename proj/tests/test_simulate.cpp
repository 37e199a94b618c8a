#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include "test_util.hpp"
#include "turbkit/imgproc.hpp"
#include "turbkit/io.hpp"
#include "turbkit/simulate.hpp"

using namespace turbkit;
using simulate::TurbulenceParams;

namespace {

VideoSequence static_clip(const Frame& f, int frames) { return VideoSequence(std::vector<Frame>(frames, f)); }

float bilinear_oracle(const Frame& f, double x, double y) {
    x = std::clamp(x, 0.0, f.width() - 1.0);
    y = std::clamp(y, 0.0, f.height() - 1.0);
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, f.width() - 1), y1 = std::min(y0 + 1, f.height() - 1);
    const double ax = x - x0, ay = y - y0;
    return static_cast<float>((1 - ay) * ((1 - ax) * f.at(x0, y0) + ax * f.at(x1, y0)) +
                              ay * ((1 - ax) * f.at(x0, y1) + ax * f.at(x1, y1)));
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[std::filesystem::relative(e.path(), root).string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

}  // namespace

TEST(Fractal, OctaveSumDecomposition) {
    noise::FractalSpec spec;
    spec.base_frequency = 0.03;
    spec.amplitudes = noise::geometric_amplitudes(4, 0.25);
    spec.seed = 17;
    const auto full = noise::fractal_volume(24, 20, 5, spec, 1);
    std::vector<double> sum(full.values.size(), 0.0);
    for (std::size_t i = 0; i < spec.amplitudes.size(); ++i) {
        noise::FractalSpec one = spec;
        one.amplitudes.assign(spec.amplitudes.size(), 0.0);
        one.amplitudes[i] = spec.amplitudes[i];
        const auto part = noise::fractal_volume(24, 20, 5, one, 1);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += part.values[k];
    }
    // Direct evaluation of the definition.
    const noise::SimplexNoise3 basis(17);
    for (int t = 0; t < 5; ++t) {
        for (int y = 0; y < 20; ++y) {
            for (int x = 0; x < 24; ++x) {
                double s = 0.0, f = 0.03;
                for (int i = 0; i < 4; ++i, f *= 2) s += std::ldexp(1.0, i) * std::pow(0.25, i) * basis(f * x, f * y, f * t);
                const std::size_t k = (static_cast<std::size_t>(t) * 20 + y) * 24 + x;
                ASSERT_NEAR(full.values[k], s, 1e-6);
                ASSERT_NEAR(full.values[k], sum[k], 1e-6);
            }
        }
    }
}

TEST(Fractal, SeedAndThreadReproducible) {
    noise::FractalSpec spec;
    spec.amplitudes = noise::geometric_amplitudes(3, 0.5);
    spec.seed = 4;
    EXPECT_EQ(noise::fractal_volume(16, 16, 6, spec, 1).values, noise::fractal_volume(16, 16, 6, spec, 4).values);
    auto other = spec;
    other.seed = 5;
    EXPECT_NE(noise::fractal_volume(16, 16, 6, spec, 1).values, noise::fractal_volume(16, 16, 6, other, 1).values);
}

TEST(Fractal, HigherFrequencyIsRougher) {
    auto roughness = [](double freq) {
        noise::FractalSpec spec;
        spec.base_frequency = freq;
        spec.amplitudes = {1.0};
        spec.seed = 3;
        const auto v = noise::fractal_volume(64, 64, 1, spec, 1);
        double g = 0.0, a = 0.0;
        for (int y = 0; y < 64; ++y)
            for (int x = 1; x < 64; ++x) {
                g += std::abs(v.at(x, y, 0) - v.at(x - 1, y, 0));
                a += std::abs(v.at(x, y, 0));
            }
        return g / a;
    };
    EXPECT_GT(roughness(0.06), 1.5 * roughness(0.015));
}

TEST(Tilt, AmplitudeScalingAndZero) {
    TurbulenceParams p;
    p.tilt_amplitude = 3.0;
    p.seed = 9;
    const auto [vx, vy] = simulate::generate_tilt_volumes(p, 32, 40, 6, 1);
    EXPECT_NEAR(noise::max_abs(vx), 3.0, 1e-5);
    EXPECT_NEAR(noise::max_abs(vy), 3.0, 1e-5);
    EXPECT_NE(vx.values, vy.values);
    p.tilt_amplitude = 0.0;
    const auto [zx, zy] = simulate::generate_tilt_volumes(p, 8, 8, 2, 1);
    EXPECT_EQ(noise::max_abs(zx), 0.0f);
    EXPECT_EQ(noise::max_abs(zy), 0.0f);
}

TEST(Tilt, TemporallyCoherent) {
    TurbulenceParams p;
    p.seed = 2;
    const auto [vx, vy] = simulate::generate_tilt_volumes(p, 32, 32, 24, 1);
    double near = 0.0, far = 0.0;
    for (int t = 0; t + 12 < 24; ++t)
        for (int i = 0; i < 32 * 32; ++i) {
            near += std::abs(vx.slice(t + 1)[i] - vx.slice(t)[i]);
            far += std::abs(vx.slice(t + 12)[i] - vx.slice(t)[i]);
        }
    EXPECT_LT(near, 0.5 * far);
}

TEST(Params, Validation) {
    TurbulenceParams p;
    p.tilt_frequency = 0.1;
    EXPECT_THROW(p.validate(), Error);
    p.tilt_amplitude = 0.0;
    EXPECT_NO_THROW(p.validate());
    TurbulenceParams q;
    q.blur_levels = 1;
    EXPECT_THROW(q.validate(), Error);
}

TEST(Warp, ZeroIsIdentityAndIntegerShiftMoves) {
    const Frame f = tk_test::random_frame(20, 16, 3, 1);
    const Frame zero(20, 16, 1, 0.0f), three(20, 16, 1, 3.0f);
    EXPECT_EQ(simulate::warp_frame(f, zero, zero), f);
    const Frame out = simulate::warp_frame(f, three, zero);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x + 3 < 20; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(x, y, c), f.at(x + 3, y, c));
}

TEST(Warp, MatchesBilinearOracle) {
    const Frame f = tk_test::random_frame(30, 24, 1, 2);
    const Frame dx = tk_test::random_frame(30, 24, 1, 3), dy = tk_test::random_frame(30, 24, 1, 4);
    Frame sx(30, 24, 1), sy(30, 24, 1);
    for (std::size_t i = 0; i < sx.samples().size(); ++i) {
        sx.samples()[i] = 8.0f * (dx.samples()[i] - 0.5f);
        sy.samples()[i] = 8.0f * (dy.samples()[i] - 0.5f);
    }
    const Frame out = simulate::warp_frame(f, sx, sy);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 30; ++x)
            ASSERT_NEAR(out.at(x, y), bilinear_oracle(f, x + sx.at(x, y), y + sy.at(x, y)), 1e-5);
}

TEST(Warp, ForwardBackRoundTrip) {
    const Frame f = imgproc::gaussian_blur(tk_test::random_frame(48, 48, 1, 5), 3.0);
    for (float d : {0.3f, 1.5f, 2.25f}) {
        const Frame plus(48, 48, 1, d), minus(48, 48, 1, -d), zero(48, 48, 1, 0.0f);
        const Frame back = simulate::warp_frame(simulate::warp_frame(f, plus, zero), minus, zero);
        for (int y = 8; y < 40; ++y)
            for (int x = 8; x < 40; ++x) ASSERT_LE(std::abs(back.at(x, y) - f.at(x, y)), 0.02) << d;
    }
}

TEST(Blur, ConstantMapMatchesUniformBlur) {
    const Frame f = tk_test::random_frame(40, 36, 3, 6);
    for (double s : {0.7, 1.5, 2.5}) {
        const Frame out = simulate::apply_adaptive_blur(f, Frame(40, 36, 1, static_cast<float>(s)), 11);
        const Frame ref = imgproc::gaussian_blur(f, s);
        for (std::size_t i = 0; i < out.samples().size(); ++i) ASSERT_NEAR(out.samples()[i], ref.samples()[i], 1e-4);
    }
    EXPECT_EQ(simulate::apply_adaptive_blur(f, Frame(40, 36, 1, 0.0f)), f);
}

TEST(Blur, StepMapSharpOnOneSide) {
    const Frame f = tk_test::random_frame(64, 32, 1, 7);
    Frame map(64, 32, 1, 0.0f);
    for (int y = 0; y < 32; ++y)
        for (int x = 32; x < 64; ++x) map.at(x, y) = 2.0f;
    const Frame out = simulate::apply_adaptive_blur(f, map, 11);
    const Frame ref = imgproc::gaussian_blur(f, 2.0);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 20; ++x) ASSERT_NEAR(out.at(x, y), f.at(x, y), 1e-6);
        for (int x = 44; x < 64; ++x) ASSERT_NEAR(out.at(x, y), ref.at(x, y), 1e-4);
    }
}

TEST(Sequence, AllZeroParamsAreBitExact) {
    TurbulenceParams p;
    p.tilt_amplitude = 0.0;
    p.blur_sigma_max = 0.0;
    const VideoSequence clean({tk_test::random_frame(24, 24, 3, 8), tk_test::random_frame(24, 24, 3, 9)});
    const auto r = simulate::simulate_sequence(clean, p, 1);
    for (std::size_t t = 0; t < clean.size(); ++t) EXPECT_EQ(r.degraded[t], clean[t]);
}

TEST(Sequence, DeterministicAcrossWorkers) {
    TurbulenceParams p;
    p.seed = 11;
    const VideoSequence clean = static_clip(simulate::textured_scene(40, 40, 1), 5);
    const auto a = simulate::simulate_sequence(clean, p, 1);
    const auto b = simulate::simulate_sequence(clean, p, 3);
    for (std::size_t t = 0; t < clean.size(); ++t) EXPECT_EQ(a.degraded[t], b.degraded[t]);
    EXPECT_EQ(a.truth.tilt_x.values, b.truth.tilt_x.values);
    EXPECT_EQ(a.truth.blur_sigma.values, b.truth.blur_sigma.values);
    EXPECT_LE(noise::max_abs(a.truth.blur_sigma), p.blur_sigma_max + 1e-6);
}

TEST(Sequence, VolumeRoundTrip) {
    TurbulenceParams p;
    const auto [vx, vy] = simulate::generate_tilt_volumes(p, 10, 12, 3, 1);
    const auto path = tk_test::temp_dir("volume") / "v.tkr";
    simulate::write_volume(vx, path);
    const auto back = simulate::read_volume(path);
    EXPECT_EQ(back.width, 12);
    EXPECT_EQ(back.height, 10);
    EXPECT_EQ(back.depth, 3);
    EXPECT_EQ(back.values, vx.values);
}

TEST(Scenes, RangesAndGrid) {
    const Frame g = simulate::grid_target(64, 48, 16, 2);
    EXPECT_EQ(g.at(8, 5), 0.15f);
    EXPECT_EQ(g.at(5, 5), 0.85f);
    const Frame t = simulate::textured_scene(50, 40, 3);
    for (float v : t.samples()) {
        ASSERT_GE(v, 0.1f - 1e-6f);
        ASSERT_LE(v, 0.9f + 1e-6f);
    }
    EXPECT_EQ(t, simulate::textured_scene(50, 40, 3));
}

TEST(Severity, MonotoneParams) {
    const auto lo = simulate::params_for_severity(0.0, 1), hi = simulate::params_for_severity(1.0, 1);
    EXPECT_LT(lo.tilt_amplitude, hi.tilt_amplitude);
    EXPECT_LT(lo.blur_sigma_max, hi.blur_sigma_max);
    EXPECT_NO_THROW(hi.validate());
    EXPECT_NE(simulate::clip_seed(7, 0), simulate::clip_seed(7, 1));
    EXPECT_EQ(simulate::clip_seed(7, 3), simulate::clip_seed(7, 3));
}

class Dataset : public ::testing::Test {
protected:
    void SetUp() override {
        src = tk_test::temp_dir("dataset_src");
        io::write_png(simulate::textured_scene(48, 40, 1), src / "a.png");
        io::write_png(simulate::grid_target(30, 30), src / "b.png");
    }
    std::filesystem::path src;
};

TEST_F(Dataset, ZeroCountWritesNothing) {
    const auto out = tk_test::temp_dir("dataset_zero");
    simulate::DatasetOptions o;
    o.count = 0;
    EXPECT_TRUE(simulate::generate_dataset(src, out, o).clips.empty());
    EXPECT_TRUE(std::filesystem::is_empty(out));
}

TEST_F(Dataset, DeterministicAndManifestFields) {
    simulate::DatasetOptions o;
    o.count = 3;
    o.width = 24;
    o.height = 20;
    o.frames = 3;
    o.master_seed = 99;
    const auto a = tk_test::temp_dir("dataset_a"), b = tk_test::temp_dir("dataset_b");
    o.workers = 1;
    const auto ma = simulate::generate_dataset(src, a, o);
    o.workers = 3;
    simulate::generate_dataset(src, b, o);
    EXPECT_EQ(read_tree(a), read_tree(b));
    ASSERT_EQ(ma.clips.size(), 3u);
    for (const auto& c : ma.clips) {
        EXPECT_TRUE(c.error.empty()) << c.error;
        EXPECT_EQ(c.seed, simulate::clip_seed(99, c.clip_id));
        EXPECT_GE(c.severity, 0.0);
        EXPECT_LE(c.severity, 1.0);
        EXPECT_TRUE(std::filesystem::exists(a / c.tilt_x_path) || std::filesystem::exists(c.tilt_x_path));
    }
    const std::string manifest = read_tree(a).at("manifest.json");
    for (const char* k : {"clip_id", "seed", "severity", "tilt_amplitude", "source"})
        EXPECT_NE(manifest.find(k), std::string::npos) << k;
    const auto clean = io::load_sequence(a / "clip_000000" / "clean", ColorMode::luma);
    EXPECT_EQ(clean.size(), 3u);
    EXPECT_EQ(clean[0].width(), 24);
}
