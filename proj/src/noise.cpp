#include "turbkit/noise.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "turbkit/core.hpp"
#include "turbkit/parallel.hpp"

namespace turbkit::noise {

namespace {

constexpr int grad3[12][3] = {{1, 1, 0}, {-1, 1, 0}, {1, -1, 0}, {-1, -1, 0}, {1, 0, 1}, {-1, 0, 1},
                              {1, 0, -1}, {-1, 0, -1}, {0, 1, 1}, {0, -1, 1}, {0, 1, -1}, {0, -1, -1}};

inline int fast_floor(double v) {
    const int i = static_cast<int>(v);
    return v < i ? i - 1 : i;
}

inline double dot3(const int* g, double x, double y, double z) { return g[0] * x + g[1] * y + g[2] * z; }

inline double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double lerp(double t, double a, double b) { return a + t * (b - a); }

inline double perlin_grad(int hash, double x, double y, double z) {
    const int h = hash & 15;
    const double u = h < 8 ? x : y;
    const double v = h < 4 ? y : (h == 12 || h == 14 ? x : z);
    return ((h & 1) ? -u : u) + ((h & 2) ? -v : v);
}

}  // namespace

Permutation::Permutation(std::uint64_t seed) {
    std::array<std::uint8_t, 256> p{};
    std::iota(p.begin(), p.end(), 0);
    // mt19937_64's output sequence is fixed by the standard; the modulo
    // mapping keeps the shuffle independent of library distributions.
    std::mt19937_64 rng(seed);
    for (int i = 255; i > 0; --i) {
        const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(p[i], p[j]);
    }
    for (int i = 0; i < 512; ++i) {
        table_[i] = p[i & 255];
    }
}

double SimplexNoise3::operator()(double x, double y, double z) const noexcept {
    constexpr double F3 = 1.0 / 3.0;
    constexpr double G3 = 1.0 / 6.0;
    const double s = (x + y + z) * F3;
    const int i = fast_floor(x + s);
    const int j = fast_floor(y + s);
    const int k = fast_floor(z + s);
    const double t = (i + j + k) * G3;
    const double x0 = x - (i - t);
    const double y0 = y - (j - t);
    const double z0 = z - (k - t);

    int i1, j1, k1, i2, j2, k2;
    if (x0 >= y0) {
        if (y0 >= z0) {
            i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 1; k2 = 0;
        } else if (x0 >= z0) {
            i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 0; k2 = 1;
        } else {
            i1 = 0; j1 = 0; k1 = 1; i2 = 1; j2 = 0; k2 = 1;
        }
    } else {
        if (y0 < z0) {
            i1 = 0; j1 = 0; k1 = 1; i2 = 0; j2 = 1; k2 = 1;
        } else if (x0 < z0) {
            i1 = 0; j1 = 1; k1 = 0; i2 = 0; j2 = 1; k2 = 1;
        } else {
            i1 = 0; j1 = 1; k1 = 0; i2 = 1; j2 = 1; k2 = 0;
        }
    }

    const double x1 = x0 - i1 + G3, y1 = y0 - j1 + G3, z1 = z0 - k1 + G3;
    const double x2 = x0 - i2 + 2.0 * G3, y2 = y0 - j2 + 2.0 * G3, z2 = z0 - k2 + 2.0 * G3;
    const double x3 = x0 - 1.0 + 3.0 * G3, y3 = y0 - 1.0 + 3.0 * G3, z3 = z0 - 1.0 + 3.0 * G3;

    const int ii = i & 255;
    const int jj = j & 255;
    const int kk = k & 255;
    const Permutation& p = perm_;
    const int gi0 = p[ii + p[jj + p[kk]]] % 12;
    const int gi1 = p[ii + i1 + p[jj + j1 + p[kk + k1]]] % 12;
    const int gi2 = p[ii + i2 + p[jj + j2 + p[kk + k2]]] % 12;
    const int gi3 = p[ii + 1 + p[jj + 1 + p[kk + 1]]] % 12;

    double n = 0.0;
    double t0 = 0.6 - x0 * x0 - y0 * y0 - z0 * z0;
    if (t0 > 0.0) {
        t0 *= t0;
        n += t0 * t0 * dot3(grad3[gi0], x0, y0, z0);
    }
    double t1 = 0.6 - x1 * x1 - y1 * y1 - z1 * z1;
    if (t1 > 0.0) {
        t1 *= t1;
        n += t1 * t1 * dot3(grad3[gi1], x1, y1, z1);
    }
    double t2 = 0.6 - x2 * x2 - y2 * y2 - z2 * z2;
    if (t2 > 0.0) {
        t2 *= t2;
        n += t2 * t2 * dot3(grad3[gi2], x2, y2, z2);
    }
    double t3 = 0.6 - x3 * x3 - y3 * y3 - z3 * z3;
    if (t3 > 0.0) {
        t3 *= t3;
        n += t3 * t3 * dot3(grad3[gi3], x3, y3, z3);
    }
    return 32.0 * n;
}

double PerlinNoise3::operator()(double x, double y, double z) const noexcept {
    const int xi = fast_floor(x);
    const int yi = fast_floor(y);
    const int zi = fast_floor(z);
    const int X = xi & 255;
    const int Y = yi & 255;
    const int Z = zi & 255;
    x -= xi;
    y -= yi;
    z -= zi;
    const double u = fade(x);
    const double v = fade(y);
    const double w = fade(z);
    const Permutation& p = perm_;
    const int A = p[X] + Y, AA = p[A] + Z, AB = p[A + 1] + Z;
    const int B = p[X + 1] + Y, BA = p[B] + Z, BB = p[B + 1] + Z;
    return lerp(w,
                lerp(v, lerp(u, perlin_grad(p[AA], x, y, z), perlin_grad(p[BA], x - 1, y, z)),
                     lerp(u, perlin_grad(p[AB], x, y - 1, z), perlin_grad(p[BB], x - 1, y - 1, z))),
                lerp(v, lerp(u, perlin_grad(p[AA + 1], x, y, z - 1), perlin_grad(p[BA + 1], x - 1, y, z - 1)),
                     lerp(u, perlin_grad(p[AB + 1], x, y - 1, z - 1), perlin_grad(p[BB + 1], x - 1, y - 1, z - 1))));
}

std::vector<double> geometric_amplitudes(int octaves, double persistence) {
    std::vector<double> a(static_cast<std::size_t>(std::max(octaves, 0)));
    double v = 1.0;
    for (double& x : a) {
        x = v;
        v *= persistence;
    }
    return a;
}

NoiseVolume fractal_volume(int width, int height, int depth, const FractalSpec& spec, unsigned workers) {
    if (width < 1 || height < 1 || depth < 1) {
        throw Error(Errc::invalid_argument, "noise volume dimensions must be positive");
    }
    if (spec.amplitudes.empty()) {
        throw Error(Errc::invalid_argument, "noise volume needs at least one octave");
    }
    NoiseVolume vol;
    vol.width = width;
    vol.height = height;
    vol.depth = depth;
    vol.octaves = static_cast<int>(spec.amplitudes.size());
    vol.base_frequency = spec.base_frequency;
    vol.amplitudes = spec.amplitudes;
    vol.values.assign(static_cast<std::size_t>(width) * height * depth, 0.0f);

    struct Octave {
        double frequency;
        double weight;
    };
    std::vector<Octave> octaves;
    double freq = spec.base_frequency;
    for (std::size_t i = 0; i < spec.amplitudes.size(); ++i) {
        octaves.push_back({freq, std::ldexp(1.0, static_cast<int>(i)) * spec.amplitudes[i]});
        freq *= spec.lacunarity;
    }

    const SimplexNoise3 simplex(spec.seed);
    const PerlinNoise3 perlin(spec.seed);
    parallel_for(
        0, depth,
        [&](std::ptrdiff_t t) {
            float* out = vol.values.data() + static_cast<std::size_t>(t) * width * height;
            const double tt = static_cast<double>(t) * spec.temporal_scale;
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    double sum = 0.0;
                    for (const Octave& o : octaves) {
                        if (o.weight == 0.0) {
                            continue;
                        }
                        const double n = spec.basis == Basis::simplex
                                             ? simplex(o.frequency * x, o.frequency * y, o.frequency * tt)
                                             : perlin(o.frequency * x, o.frequency * y, o.frequency * tt);
                        sum += o.weight * n;
                    }
                    out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(sum);
                }
            }
        },
        workers);
    return vol;
}

float max_abs(const NoiseVolume& v) {
    float m = 0.0f;
    for (float x : v.values) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace turbkit::noise
