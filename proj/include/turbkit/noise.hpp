#pragma once

// Seedable 3D gradient noise (simplex and improved Perlin) and fractal noise
// volumes. Permutation tables are derived from the seed with a fixed shuffle,
// so volumes are bit-reproducible across platforms and thread counts.

#include <array>
#include <cstdint>
#include <vector>

namespace turbkit::noise {

class Permutation {
public:
    explicit Permutation(std::uint64_t seed);
    int operator[](int i) const noexcept { return table_[static_cast<std::size_t>(i)]; }

private:
    std::array<std::uint8_t, 512> table_{};
};

// 3D simplex noise, output roughly in [-1, 1].
class SimplexNoise3 {
public:
    explicit SimplexNoise3(std::uint64_t seed) : perm_(seed) {}
    double operator()(double x, double y, double z) const noexcept;

private:
    Permutation perm_;
};

// Improved Perlin noise (quintic fade, 12 edge gradients), roughly in [-1, 1].
class PerlinNoise3 {
public:
    explicit PerlinNoise3(std::uint64_t seed) : perm_(seed) {}
    double operator()(double x, double y, double z) const noexcept;

private:
    Permutation perm_;
};

struct NoiseVolume {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::vector<float> values;  // index (t * height + y) * width + x
    int octaves = 0;
    double base_frequency = 0.0;
    std::vector<double> amplitudes;

    float at(int x, int y, int t) const noexcept {
        return values[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
    std::size_t slice_size() const noexcept { return static_cast<std::size_t>(width) * height; }
    const float* slice(int t) const noexcept { return values.data() + static_cast<std::size_t>(t) * slice_size(); }
};

enum class Basis { simplex, perlin };

struct FractalSpec {
    double base_frequency = 0.03;     // cycles per pixel (and per frame) of octave 0
    std::vector<double> amplitudes;   // A_i, one per octave
    double lacunarity = 2.0;          // f_i = base_frequency * lacunarity^i
    double temporal_scale = 1.0;      // frames are multiplied by this before sampling
    std::uint64_t seed = 0;
    Basis basis = Basis::simplex;
};

// A_i = persistence^i for i in [0, octaves).
std::vector<double> geometric_amplitudes(int octaves, double persistence);

// s(x, y, t) = sum_i 2^i A_i noise(f_i x, f_i y, f_i t), unnormalized.
NoiseVolume fractal_volume(int width, int height, int depth, const FractalSpec& spec, unsigned workers = 0);

// Largest |value| in the volume.
float max_abs(const NoiseVolume& v);

}  // namespace turbkit::noise
