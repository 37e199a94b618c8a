#include "turbkit/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>

namespace turbkit::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error(Errc::io_failure, "cannot open " + path.string());
    }
    return f;
}

void png_error_handler(png_structp, png_const_charp msg) {
    throw Error(Errc::io_failure, std::string("libpng: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

std::uint8_t quantize(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

bool is_png(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

std::optional<long long> embedded_number(const std::string& name) {
    // Last run of digits in the stem.
    std::optional<long long> result;
    std::size_t i = 0;
    while (i < name.size()) {
        if (std::isdigit(static_cast<unsigned char>(name[i]))) {
            std::size_t j = i;
            while (j < name.size() && std::isdigit(static_cast<unsigned char>(name[j]))) {
                ++j;
            }
            result = std::stoll(name.substr(i, std::min<std::size_t>(j - i, 18)));
            i = j;
        } else {
            ++i;
        }
    }
    return result;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_png(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        const auto na = embedded_number(a.stem().string());
        const auto nb = embedded_number(b.stem().string());
        if (na && nb && *na != *nb) {
            return *na < *nb;
        }
        return a.filename().string() < b.filename().string();
    });
    return files;
}

template <class T>
void put_le(std::ostream& os, T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        os.write(bytes.data(), bytes.size());
    } else {
        os.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }
}

template <class T>
T get_le(std::istream& is) {
    std::array<char, sizeof(T)> bytes{};
    is.read(bytes.data(), bytes.size());
    if (!is) {
        throw Error(Errc::io_failure, "truncated raw container");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    return std::bit_cast<T>(bytes);
}

void read_floats(std::istream& is, std::span<float> out) {
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!is) {
        throw Error(Errc::io_failure, "truncated raw container");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : out) {
            auto bytes = std::bit_cast<std::array<char, 4>>(v);
            std::reverse(bytes.begin(), bytes.end());
            v = std::bit_cast<float>(bytes);
        }
    }
}

void write_floats(std::ostream& os, std::span<const float> in) {
    if constexpr (std::endian::native == std::endian::big) {
        for (float v : in) {
            put_le<float>(os, v);
        }
    } else {
        os.write(reinterpret_cast<const char*>(in.data()), static_cast<std::streamsize>(in.size_bytes()));
    }
}

}  // namespace

std::string frame_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06d.png", index);
    return buf;
}

Frame read_png(const fs::path& path, ColorMode mode) {
    auto file = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw Error(Errc::unsupported_format, "not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::io_failure, "libpng allocation failed");
    }
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth > 8) {
        throw Error(Errc::unsupported_format,
                    "unsupported bit depth " + std::to_string(bit_depth) + " in " + path.string());
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int src_channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);

    std::vector<png_byte> buffer(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = buffer.data() + y * rowbytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    Frame raw(width, height, src_channels);
    auto dst = raw.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<float>(buffer[i]) / 255.0f;
    }
    if (mode == ColorMode::luma) {
        return to_luma(raw);
    }
    return to_rgb(raw);
}

void write_png(const Frame& frame, const fs::path& path) {
    if (frame.channels() != 1 && frame.channels() != 3) {
        throw Error(Errc::unsupported_format, "PNG output supports 1 or 3 channels");
    }
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io_failure, "libpng allocation failed");
    }
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_IHDR(png, info, frame.width(), frame.height(), 8,
                 frame.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const std::size_t rowlen = static_cast<std::size_t>(frame.width()) * frame.channels();
    std::vector<png_byte> row(rowlen);
    auto src = frame.samples();
    for (int y = 0; y < frame.height(); ++y) {
        for (std::size_t i = 0; i < rowlen; ++i) {
            row[i] = quantize(src[y * rowlen + i]);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
}

std::vector<Frame> read_raw(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(Errc::missing_path, "cannot open " + path.string());
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, raw_magic, 4) != 0) {
        throw Error(Errc::unsupported_format, "bad raw container magic in " + path.string());
    }
    const auto width = get_le<std::uint32_t>(is);
    const auto height = get_le<std::uint32_t>(is);
    const auto channels = get_le<std::uint32_t>(is);
    const auto count = get_le<std::uint32_t>(is);
    if (channels == 0 || width > (1u << 16) || height > (1u << 16) || channels > 64) {
        throw Error(Errc::unsupported_format, "implausible raw container header in " + path.string());
    }
    std::vector<Frame> frames;
    frames.reserve(count);
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    for (std::uint32_t f = 0; f < count; ++f) {
        Frame frame(static_cast<int>(width), static_cast<int>(height), static_cast<int>(channels), 0.0f,
                    static_cast<int>(f));
        auto dst = frame.samples();
        std::vector<float> buf(plane);
        for (std::uint32_t c = 0; c < channels; ++c) {
            read_floats(is, buf);
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i * channels + c] = buf[i];
            }
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

void write_raw(std::span<const Frame> frames, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error(Errc::io_failure, "cannot write " + path.string());
    }
    const int w = frames.empty() ? 0 : frames[0].width();
    const int h = frames.empty() ? 0 : frames[0].height();
    const int nc = frames.empty() ? 1 : frames[0].channels();
    os.write(raw_magic, 4);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(nc));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(frames.size()));
    for (const Frame& f : frames) {
        if (f.width() != w || f.height() != h || f.channels() != nc) {
            throw Error(Errc::dimension_mismatch, "raw container frames must share a shape");
        }
        auto src = f.samples();
        std::vector<float> buf(f.pixel_count());
        for (int c = 0; c < nc; ++c) {
            for (std::size_t i = 0; i < buf.size(); ++i) {
                buf[i] = src[i * nc + c];
            }
            write_floats(os, buf);
        }
    }
    if (!os) {
        throw Error(Errc::io_failure, "write failed for " + path.string());
    }
}

VideoSequence load_sequence(const fs::path& path, ColorMode mode) {
    if (!fs::exists(path)) {
        throw Error(Errc::missing_path, "missing path: " + path.string());
    }
    std::vector<Frame> frames;
    if (fs::is_regular_file(path)) {
        frames = read_raw(path);
        for (Frame& f : frames) {
            f = mode == ColorMode::luma ? to_luma(f) : to_rgb(f);
        }
    } else {
        for (const auto& file : sorted_pngs(path)) {
            frames.push_back(read_png(file, mode));
            if (!frames.back().same_shape(frames.front())) {
                throw Error(Errc::dimension_mismatch, "dimension mismatch: " + file.string());
            }
        }
    }
    if (frames.empty()) {
        throw Error(Errc::no_frames, "no frames found in " + path.string());
    }
    return VideoSequence(std::move(frames));
}

std::vector<fs::path> save_sequence(const VideoSequence& seq, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<fs::path> written;
    written.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        auto p = dir / frame_filename(static_cast<int>(i));
        write_png(seq[i], p);
        written.push_back(std::move(p));
    }
    return written;
}

void write_mask_png(const MotionMask& mask, const fs::path& path) {
    Frame f(mask.width, mask.height, 1);
    auto dst = f.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = mask.labels[i] ? 1.0f : 0.0f;
    }
    write_png(f, path);
}

MotionMask read_mask_png(const fs::path& path) {
    const Frame f = read_png(path, ColorMode::luma);
    MotionMask mask(f.width(), f.height());
    auto src = f.samples();
    for (std::size_t i = 0; i < src.size(); ++i) {
        mask.labels[i] = src[i] >= 0.5f ? 1 : 0;
    }
    return mask;
}

std::vector<MotionMask> load_masks(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(Errc::missing_path, "missing mask directory: " + dir.string());
    }
    std::vector<MotionMask> masks;
    int index = 0;
    for (const auto& file : sorted_pngs(dir)) {
        masks.push_back(read_mask_png(file));
        masks.back().frame_index = index++;
    }
    return masks;
}

}  // namespace turbkit::io
