#include <gtest/gtest.h>

#include <Eigen/Sparse>

#include <cmath>

#include "test_util.hpp"
#include "turbkit/imgproc.hpp"
#include "turbkit/stackblend.hpp"

using namespace turbkit;
using stackblend::BlendParams;

namespace {

MotionMask disk_mask(int w, int h, int cx, int cy, int r) {
    MotionMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r);
    return m;
}

// Max-abs residual of the 4-neighbour Poisson system on `region`, evaluated on
// the output with the background as boundary.
double poisson_residual(const Frame& out, const Frame& bg, const Frame& fg, const MotionMask& region) {
    const int w = out.width(), h = out.height();
    double worst = 0.0;
    for (int c = 0; c < out.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!region.at(x, y)) continue;
                double lhs = 0.0, rhs = 0.0;
                const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    lhs += out.at(x, y, c);
                    rhs += static_cast<double>(fg.at(x, y, c)) - fg.at(nx[k], ny[k], c);
                    if (region.at(nx[k], ny[k])) lhs -= out.at(nx[k], ny[k], c);
                    else rhs += bg.at(nx[k], ny[k], c);
                }
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        }
    }
    return worst;
}

// Same system solved directly.
std::vector<double> direct_solve(const Frame& bg, const Frame& fg, const MotionMask& region) {
    const int w = bg.width(), h = bg.height();
    std::vector<int> id(static_cast<std::size_t>(w) * h, -1);
    int m = 0;
    for (int i = 0; i < w * h; ++i)
        if (region.labels[i]) id[i] = m++;
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int p = id[y * w + x];
            if (p < 0) continue;
            const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
            int deg = 0;
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                ++deg;
                b[p] += static_cast<double>(fg.at(x, y)) - fg.at(nx[k], ny[k]);
                const int q = id[ny[k] * w + nx[k]];
                if (q >= 0) trips.emplace_back(p, q, -1.0);
                else b[p] += bg.at(nx[k], ny[k]);
            }
            trips.emplace_back(p, p, deg);
        }
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    const Eigen::VectorXd sol = solver.solve(b);
    return std::vector<double>(sol.data(), sol.data() + m);
}

}  // namespace

TEST(GaussianStack, MatchesWeightedMeanOracle) {
    std::vector<Frame> frames;
    for (int i = 0; i < 9; ++i) frames.push_back(tk_test::random_frame(6, 5, 3, 100 + i));
    const VideoSequence seq(frames);
    const double sigma = 1.3;
    const auto out = stackblend::gaussian_stack(seq, 3, sigma);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 6; ++x) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0, ws = 0.0;
                for (int k = 0; k < 9; ++k) {
                    if (std::abs(k - 3) > 4) continue;  // radius ceil(3 * 1.3)
                    const double wk = std::exp(-(k - 3.0) * (k - 3.0) / (2 * sigma * sigma));
                    s += wk * frames[k].at(x, y, c);
                    ws += wk;
                }
                EXPECT_NEAR(out.frame.at(x, y, c), s / ws, 1e-6);
            }
        }
    }
    EXPECT_EQ(out.window_span, 2 * 4 + 1);
}

TEST(GaussianStack, ConstantSequenceUnchangedAndMasksExclude) {
    const VideoSequence flat({Frame(4, 4, 1, 0.3f), Frame(4, 4, 1, 0.3f), Frame(4, 4, 1, 0.3f)});
    EXPECT_EQ(stackblend::gaussian_stack(flat, 1, 2.0).frame.at(2, 2), 0.3f);

    const VideoSequence seq({Frame(4, 4, 1, 0.0f), Frame(4, 4, 1, 1.0f), Frame(4, 4, 1, 0.0f)});
    std::vector<MotionMask> masks(3, MotionMask(4, 4));
    masks[1] = MotionMask(4, 4, true);
    // Pixels foreground in the centre frame are rebuilt from the neighbours.
    EXPECT_EQ(stackblend::gaussian_stack(seq, 1, 1.0, masks).frame.at(0, 0), 0.0f);
    std::vector<MotionMask> all(3, MotionMask(4, 4, true));
    // No weight left anywhere: centre frame value.
    EXPECT_EQ(stackblend::gaussian_stack(seq, 1, 1.0, all).frame.at(0, 0), 1.0f);
    EXPECT_THROW(stackblend::gaussian_stack(seq, 3, 1.0), Error);
    EXPECT_THROW(stackblend::gaussian_stack(seq, 1, 0.0), Error);
}

TEST(Poisson, ResidualOn128AndDirectSolverAgreement) {
    const Frame bg = imgproc::gaussian_blur(tk_test::random_frame(128, 128, 1, 1), 2.0);
    const Frame fg = imgproc::gaussian_blur(tk_test::random_frame(128, 128, 1, 2), 1.0);
    const MotionMask region = disk_mask(128, 128, 60, 70, 30);
    stackblend::PoissonStats stats;
    const Frame out = stackblend::poisson_blend(bg, fg, region, BlendParams{}, &stats);
    EXPECT_TRUE(stats.converged);
    EXPECT_LE(poisson_residual(out, bg, fg, region), 1e-3);

    const auto ref = direct_solve(bg, fg, region);
    std::size_t k = 0;
    double worst = 0.0;
    for (int i = 0; i < 128 * 128; ++i) {
        if (region.labels[i]) worst = std::max(worst, std::abs(out.samples()[i] - ref[k++]));
        else ASSERT_EQ(out.samples()[i], bg.samples()[i]);
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Poisson, ResidualDecreases) {
    const Frame bg = tk_test::random_frame(40, 40, 1, 3);
    const Frame fg = tk_test::random_frame(40, 40, 1, 4);
    stackblend::PoissonStats stats;
    stackblend::poisson_blend(bg, fg, disk_mask(40, 40, 20, 20, 10), BlendParams{}, &stats);
    ASSERT_GE(stats.residual_history.size(), 2u);
    EXPECT_LT(stats.residual_history.back(), stats.residual_history.front());
}

TEST(Blend, EmptyAndFullMasks) {
    const Frame bg = tk_test::random_frame(20, 20, 3, 5);
    const Frame fg = tk_test::random_frame(20, 20, 3, 6);
    for (auto mode : {stackblend::BlendMode::poisson, stackblend::BlendMode::pyramid}) {
        BlendParams p;
        p.mode = mode;
        EXPECT_EQ(stackblend::blend_foreground(bg, fg, MotionMask(20, 20), p), bg);
        EXPECT_EQ(stackblend::blend_foreground(bg, fg, MotionMask(20, 20, true), p), fg);
    }
}

TEST(Blend, PyramidLeavesFarPixelsUntouched) {
    const Frame bg = tk_test::random_frame(96, 96, 3, 7);
    const Frame fg = tk_test::random_frame(96, 96, 3, 8);
    BlendParams p;
    p.mode = stackblend::BlendMode::pyramid;
    const MotionMask mask = disk_mask(96, 96, 30, 30, 8);
    const Frame out = stackblend::blend_foreground(bg, fg, mask, p);
    for (int y = 80; y < 96; ++y)
        for (int x = 80; x < 96; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(x, y, c), bg.at(x, y, c));
    // Centre of the object follows the foreground.
    double diff_fg = 0.0, diff_bg = 0.0;
    for (int c = 0; c < 3; ++c) {
        diff_fg += std::abs(out.at(30, 30, c) - fg.at(30, 30, c));
        diff_bg += std::abs(out.at(30, 30, c) - bg.at(30, 30, c));
    }
    EXPECT_LT(diff_fg, diff_bg);
}

TEST(Blend, ShapeMismatchThrows) {
    EXPECT_THROW(stackblend::blend_foreground(Frame(4, 4, 1), Frame(5, 4, 1), MotionMask(4, 4)), Error);
    EXPECT_THROW(stackblend::blend_foreground(Frame(4, 4, 1), Frame(4, 4, 1), MotionMask(3, 4)), Error);
}
