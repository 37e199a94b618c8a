#pragma once

// Thin RAII layer over FFTW's double-precision real 2D transforms.
//
// Plans are created with FFTW_ESTIMATE so that the chosen algorithm (and hence
// the rounding behaviour) is identical from run to run. Plan creation is
// serialized internally; execution is thread-safe for distinct buffers.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace turbkit::fft {

template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}
    T* allocate(std::size_t n);
    void deallocate(T* p, std::size_t) noexcept;
    template <class U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using RealBuffer = std::vector<double, FftwAllocator<double>>;
using ComplexBuffer = std::vector<std::complex<double>, FftwAllocator<std::complex<double>>>;

class RealPlan2D {
public:
    RealPlan2D(int rows, int cols);
    ~RealPlan2D();
    RealPlan2D(const RealPlan2D&) = delete;
    RealPlan2D& operator=(const RealPlan2D&) = delete;

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    int complex_cols() const noexcept { return cols_ / 2 + 1; }
    std::size_t real_size() const noexcept { return static_cast<std::size_t>(rows_) * cols_; }
    std::size_t complex_size() const noexcept { return static_cast<std::size_t>(rows_) * complex_cols(); }

    RealBuffer make_real() const { return RealBuffer(real_size(), 0.0); }
    ComplexBuffer make_complex() const { return ComplexBuffer(complex_size()); }

    void forward(RealBuffer& in, ComplexBuffer& out) const;
    // Unnormalized inverse; `in` is clobbered.
    void inverse(ComplexBuffer& in, RealBuffer& out) const;

private:
    int rows_;
    int cols_;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
int good_size(int n);

}  // namespace turbkit::fft
