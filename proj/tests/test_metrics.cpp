#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "test_util.hpp"
#include "turbkit/imgproc.hpp"
#include "turbkit/metrics.hpp"
#include "turbkit/simulate.hpp"

using namespace turbkit;

namespace {

// Per-position SSIM straight from the definition.
double ssim_oracle(const Frame& a, const Frame& b) {
    const int win = 11, r = 5;
    std::vector<double> g(win * win);
    double gs = 0.0;
    for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) gs += g[j * win + i] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * 1.5 * 1.5));
    for (double& v : g) v /= gs;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double sum = 0.0;
        int count = 0;
        for (int y = r; y + r < a.height(); ++y) {
            for (int x = r; x + r < a.width(); ++x) {
                double mx = 0, my = 0;
                for (int j = 0; j < win; ++j)
                    for (int i = 0; i < win; ++i) {
                        mx += g[j * win + i] * a.at(x + i - r, y + j - r, c);
                        my += g[j * win + i] * b.at(x + i - r, y + j - r, c);
                    }
                double vx = 0, vy = 0, cov = 0;
                for (int j = 0; j < win; ++j)
                    for (int i = 0; i < win; ++i) {
                        const double dx = a.at(x + i - r, y + j - r, c) - mx, dy = b.at(x + i - r, y + j - r, c) - my;
                        vx += g[j * win + i] * dx * dx;
                        vy += g[j * win + i] * dy * dy;
                        cov += g[j * win + i] * dx * dy;
                    }
                sum += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        }
        total += sum / count;
    }
    return total / a.channels();
}

// Grid of dark lines rotated by `deg` about the centre.
Frame rotated_grid(int size, double deg, int spacing = 24) {
    Frame f(size, size, 1, 0.85f);
    const double th = deg * std::numbers::pi / 180.0, c = std::cos(th), s = std::sin(th);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double px = x - size / 2.0, py = y - size / 2.0;
            const double u = c * px + s * py + 1000.0 * spacing, v = -s * px + c * py + 1000.0 * spacing;
            if (std::fmod(u, spacing) < 2.0 || std::fmod(v, spacing) < 2.0) f.at(x, y) = 0.15f;
        }
    return f;
}

}  // namespace

TEST(Psnr, Examples) {
    const Frame a(8, 8, 1, 0.2f);
    EXPECT_EQ(metrics::psnr(a, a), std::numeric_limits<double>::infinity());
    EXPECT_NEAR(metrics::psnr(Frame(8, 8, 1, 0.0f), Frame(8, 8, 1, 0.1f)), 20.0, 1e-5);
    EXPECT_NEAR(metrics::psnr(Frame(4, 4, 3, 0.0f), Frame(4, 4, 3, 1.0f)), 0.0, 1e-9);
    EXPECT_THROW(metrics::psnr(Frame(4, 4, 1), Frame(4, 5, 1)), Error);
}

TEST(Psnr, MatchesOracle) {
    const Frame a = tk_test::random_frame(17, 13, 3, 1), b = tk_test::random_frame(17, 13, 3, 2);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.samples().size(); ++i) {
        const double d = static_cast<double>(a.samples()[i]) - b.samples()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.samples().size());
    EXPECT_NEAR(metrics::psnr(a, b), 10.0 * std::log10(1.0 / mse), 1e-9);
}

TEST(Ssim, Examples) {
    const Frame a = tk_test::random_frame(32, 32, 1, 3);
    EXPECT_NEAR(metrics::ssim(a, a), 1.0, 1e-9);
    Frame inv = a;
    for (float& v : inv.samples()) v = 1.0f - v;
    EXPECT_LT(metrics::ssim(a, inv), 0.0);
    EXPECT_THROW(metrics::ssim(Frame(8, 8, 1), Frame(8, 8, 1)), Error);
}

TEST(Ssim, MatchesDirectFormula) {
    for (int k = 0; k < 5; ++k) {
        const Frame a = imgproc::gaussian_blur(tk_test::random_frame(24, 20, 2, 10 + k), 1.0);
        Frame b = a;
        const Frame n = tk_test::random_frame(24, 20, 2, 20 + k);
        for (std::size_t i = 0; i < b.samples().size(); ++i) b.samples()[i] += 0.2f * (n.samples()[i] - 0.5f);
        EXPECT_NEAR(metrics::ssim(a, b), ssim_oracle(a, b), 1e-6);
    }
}

TEST(Iou, Examples) {
    MotionMask a(4, 4), b(4, 4);
    EXPECT_EQ(metrics::mask_iou(a, b), 1.0);
    a.set(0, 0, true);
    EXPECT_EQ(metrics::mask_iou(a, b), 0.0);
    b.set(0, 0, true);
    b.set(1, 0, true);
    EXPECT_EQ(metrics::mask_iou(a, b), 0.5);
    EXPECT_EQ(metrics::mask_iou(b, b), 1.0);
}

TEST(LineDev, AxisDeviation) {
    EXPECT_EQ(metrics::axis_deviation(0.0), 0.0);
    EXPECT_EQ(metrics::axis_deviation(90.0), 0.0);
    EXPECT_EQ(metrics::axis_deviation(-180.0), 0.0);
    EXPECT_NEAR(metrics::axis_deviation(87.0), 3.0, 1e-12);
    EXPECT_NEAR(metrics::axis_deviation(-2.0), 2.0, 1e-12);
    EXPECT_NEAR(metrics::axis_deviation(135.0), 45.0, 1e-12);
}

TEST(LineDev, HoughFindsHorizontalSegment) {
    MotionMask edges(120, 40);
    for (int x = 10; x < 110; ++x) edges.set(x, 20, true);
    const auto segs = metrics::probabilistic_hough(edges);
    ASSERT_FALSE(segs.empty());
    EXPECT_LE(metrics::axis_deviation(segs[0].angle_deg()), 1.0);
    EXPECT_GE(segs[0].length(), 90.0);
}

TEST(LineDev, PerfectGridNearZero) {
    const auto e = metrics::line_deviation(simulate::grid_target(192, 192, 24, 2));
    ASSERT_TRUE(e.defined);
    EXPECT_LE(e.score, 0.2);
    EXPECT_GT(e.line_count, 4);
}

TEST(LineDev, RotatedGridReportsAngle) {
    const auto e = metrics::line_deviation(rotated_grid(192, 2.0));
    ASSERT_TRUE(e.defined);
    EXPECT_GE(e.score, 1.5);
    EXPECT_LE(e.score, 2.5);
}

TEST(LineDev, BlankUndefinedAndInversionInvariant) {
    EXPECT_FALSE(metrics::line_deviation(Frame(64, 64, 1, 0.5f)).defined);
    const Frame g = rotated_grid(160, 1.0);
    Frame inv = g;
    for (float& v : inv.samples()) v = 1.0f - v;
    const auto a = metrics::line_deviation(g), b = metrics::line_deviation(inv);
    EXPECT_EQ(a.defined, b.defined);
    EXPECT_NEAR(a.score, b.score, 1e-9);
}

TEST(Rolling, Examples) {
    const std::vector<double> v{1.0, 2.0, 3.0};
    const auto r = metrics::rolling_stats(v, 3);
    ASSERT_EQ(r.mean.size(), 1u);
    EXPECT_DOUBLE_EQ(r.mean[0], 2.0);
    EXPECT_NEAR(r.std[0], std::sqrt(2.0 / 3.0), 1e-12);
    const auto s = metrics::rolling_stats(std::vector<double>{1, 2, 3, 4}, 2);
    EXPECT_EQ(s.mean, (std::vector<double>{1.5, 2.5, 3.5}));
    const auto t = metrics::rolling_stats(std::vector<double>{4, 6}, 10);
    EXPECT_EQ(t.mean, (std::vector<double>{5.0}));
}

TEST(Rolling, SequenceReport) {
    std::vector<Frame> frames;
    for (int t = 0; t < 4; ++t) frames.push_back(rotated_grid(128, t * 0.5));
    const auto rep = metrics::rolling_line_deviation(VideoSequence(frames), 2, {}, 1);
    EXPECT_EQ(rep.per_frame.size(), 4u);
    EXPECT_EQ(rep.rolling.mean.size(), 3u);
    EXPECT_THROW(metrics::rolling_line_deviation(VideoSequence({Frame(32, 32, 1, 0.5f)})), Error);
}

TEST(Evaluate, CsvAndJson) {
    const VideoSequence a({tk_test::random_frame(16, 16, 1, 1), tk_test::random_frame(16, 16, 1, 2)});
    metrics::EvaluationInputs in;
    in.restored = &a;
    in.reference = &a;
    const auto rep = metrics::evaluate({"psnr", "ssim"}, in);
    ASSERT_EQ(rep.frames.size(), 2u);
    EXPECT_TRUE(std::isinf(*rep.frames[0].psnr));
    const std::string csv = rep.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame,psnr,ssim");
    EXPECT_NE(rep.to_json().find("psnr_infinite"), std::string::npos);
    EXPECT_THROW(metrics::evaluate({"bogus"}, in), Error);
    EXPECT_THROW(metrics::evaluate({"iou"}, in), Error);
}
