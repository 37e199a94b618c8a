#include <gtest/gtest.h>

#include <png.h>

#include <cstdio>

#include "test_util.hpp"
#include "turbkit/io.hpp"

using namespace turbkit;
namespace fs = std::filesystem;

namespace {

void write_png16(const fs::path& path, int w, int h) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    ASSERT_NE(fp, nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 2, 0x80);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

TEST(Frame, SampleCountMatchesShape) {
    Frame f(5, 3, 3, 0.25f);
    EXPECT_EQ(f.samples().size(), 45u);
    EXPECT_THROW(Frame(2, 2, 1, std::vector<float>(3)), Error);
}

TEST(VideoSequence, RejectsMixedShapesAndRenumbers) {
    std::vector<Frame> frames{Frame(4, 4, 1, 0.0f, 7), Frame(4, 4, 1, 0.0f, 3)};
    VideoSequence seq(frames);
    EXPECT_EQ(seq[0].index(), 0);
    EXPECT_EQ(seq[1].index(), 1);
    frames.push_back(Frame(5, 4, 1));
    EXPECT_THROW(VideoSequence{frames}, Error);
}

TEST(LoadSequence, WhitePngsMapToOne) {
    auto dir = tk_test::temp_dir("white");
    for (int i = 0; i < 3; ++i) {
        io::write_png(Frame(4, 4, 1, 1.0f), dir / io::frame_filename(i));
    }
    const auto seq = io::load_sequence(dir, ColorMode::luma);
    ASSERT_EQ(seq.size(), 3u);
    for (const Frame& f : seq) {
        for (float v : f.samples()) {
            EXPECT_EQ(v, 1.0f);
        }
    }
}

TEST(LoadSequence, EightBitValuesMapExactly) {
    auto dir = tk_test::temp_dir("levels");
    Frame f(256, 1, 1);
    for (int x = 0; x < 256; ++x) {
        f.at(x, 0) = static_cast<float>(x) / 255.0f;
    }
    io::write_png(f, dir / "frame_000000.png");
    const auto seq = io::load_sequence(dir, ColorMode::luma);
    for (int x = 0; x < 256; ++x) {
        EXPECT_EQ(seq[0].at(x, 0), static_cast<float>(x) / 255.0f);
    }
}

TEST(LoadSequence, ErrorCases) {
    auto empty = tk_test::temp_dir("empty");
    try {
        io::load_sequence(empty, ColorMode::luma);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::no_frames);
    }

    auto mixed = tk_test::temp_dir("mixed");
    io::write_png(Frame(4, 4, 1), mixed / "frame_000000.png");
    io::write_png(Frame(5, 4, 1), mixed / "frame_000001.png");
    try {
        io::load_sequence(mixed, ColorMode::luma);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::dimension_mismatch);
    }

    try {
        io::load_sequence(empty / "nope", ColorMode::luma);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_path);
    }

    auto deep = tk_test::temp_dir("deep");
    write_png16(deep / "frame_000000.png", 4, 4);
    try {
        io::load_sequence(deep, ColorMode::luma);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::unsupported_format);
    }
}

TEST(LoadSequence, OrdersByEmbeddedNumber) {
    auto dir = tk_test::temp_dir("order");
    io::write_png(Frame(2, 2, 1, 0.0f), dir / "f2.png");
    io::write_png(Frame(2, 2, 1, 1.0f), dir / "f10.png");
    io::write_png(Frame(2, 2, 1, 0.0f), dir / "f1.png");
    const auto seq = io::load_sequence(dir, ColorMode::luma);
    EXPECT_EQ(seq[2].at(0, 0), 1.0f);
}

TEST(LoadSequence, PngRoundTripWithinOneStep) {
    auto dir = tk_test::temp_dir("roundtrip");
    std::vector<Frame> frames{tk_test::random_frame(9, 7, 3, 1), tk_test::random_frame(9, 7, 3, 2)};
    const VideoSequence seq(frames);
    io::save_sequence(seq, dir);
    const auto a = io::load_sequence(dir, ColorMode::rgb);
    io::save_sequence(a, dir);
    const auto b = io::load_sequence(dir, ColorMode::rgb);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        for (std::size_t k = 0; k < seq[i].samples().size(); ++k) {
            EXPECT_LE(std::abs(seq[i].samples()[k] - a[i].samples()[k]), 1.0f / 255.0f);
        }
    }
    EXPECT_EQ(a, b);
}

TEST(RawFormat, LosslessRoundTrip) {
    auto dir = tk_test::temp_dir("raw");
    std::vector<Frame> frames{tk_test::random_frame(6, 5, 3, 3), tk_test::random_frame(6, 5, 3, 4)};
    io::write_raw(frames, dir / "x.tkr");
    const auto back = io::read_raw(dir / "x.tkr");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], frames[0]);
    EXPECT_EQ(back[1], frames[1]);
    const auto seq = io::load_sequence(dir / "x.tkr", ColorMode::rgb);
    EXPECT_EQ(seq.size(), 2u);
}

TEST(SequenceMean, Examples) {
    const VideoSequence two({Frame(3, 3, 1, 0.2f), Frame(3, 3, 1, 0.4f)});
    EXPECT_NEAR(sequence_mean(two)[0], 0.3, 1e-7);
    const VideoSequence one({Frame(3, 3, 1, 0.7f)});
    EXPECT_NEAR(sequence_mean(one)[0], 0.7, 1e-7);
    EXPECT_THROW(sequence_mean(VideoSequence{}), Error);
}

TEST(SequenceMean, MatchesDoubleLoopAndIgnoresOrder) {
    std::vector<Frame> frames;
    for (int i = 0; i < 5; ++i) {
        frames.push_back(tk_test::random_frame(8, 8, 3, 10 + i));
    }
    const auto mean = sequence_mean(VideoSequence(frames));
    for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (const Frame& f : frames) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    s += f.at(x, y, c);
                }
            }
        }
        EXPECT_NEAR(mean[c], s / (5 * 64), 1e-6);
    }
    std::reverse(frames.begin(), frames.end());
    const auto rev = sequence_mean(VideoSequence(frames));
    for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(rev[c], mean[c], 1e-12);
    }
}

TEST(ToLuma, Examples) {
    Frame white(1, 1, 3, 1.0f);
    EXPECT_NEAR(to_luma(white).at(0, 0), 1.0f, 1e-6);
    Frame green(1, 1, 3, 0.0f);
    green.at(0, 0, 1) = 1.0f;
    EXPECT_NEAR(to_luma(green).at(0, 0), 0.587f, 1e-6);
    const Frame r = tk_test::random_frame(1, 1, 3, 5);
    const double expect = 0.299 * r.at(0, 0, 0) + 0.587 * r.at(0, 0, 1) + 0.114 * r.at(0, 0, 2);
    EXPECT_NEAR(to_luma(r).at(0, 0), expect, 1e-6);
}

TEST(ToLuma, IdempotentOnGrey) {
    const Frame g = tk_test::random_frame(4, 4, 1, 6);
    EXPECT_EQ(to_luma(g), g);
    EXPECT_EQ(to_luma(to_luma(g)), g);
}
