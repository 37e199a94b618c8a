#include "turbkit/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <new>

#include "turbkit/core.hpp"

namespace turbkit::fft {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

template <class T>
T* FftwAllocator<T>::allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p && n != 0) {
        throw std::bad_alloc();
    }
    return static_cast<T*>(p);
}

template <class T>
void FftwAllocator<T>::deallocate(T* p, std::size_t) noexcept {
    fftw_free(p);
}

template struct FftwAllocator<double>;
template struct FftwAllocator<std::complex<double>>;

RealPlan2D::RealPlan2D(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw Error(Errc::invalid_argument, "FFT plan dimensions must be positive");
    }
    RealBuffer real = make_real();
    ComplexBuffer cplx = make_complex();
    std::lock_guard lock(planner_mutex());
    forward_plan_ = fftw_plan_dft_r2c_2d(rows, cols, real.data(), reinterpret_cast<fftw_complex*>(cplx.data()),
                                         FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_2d(rows, cols, reinterpret_cast<fftw_complex*>(cplx.data()), real.data(),
                                         FFTW_ESTIMATE);
    if (!forward_plan_ || !inverse_plan_) {
        throw Error(Errc::invalid_argument, "FFTW planning failed");
    }
}

RealPlan2D::~RealPlan2D() {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) {
        fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    }
    if (inverse_plan_) {
        fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    }
}

void RealPlan2D::forward(RealBuffer& in, ComplexBuffer& out) const {
    if (in.size() != real_size() || out.size() != complex_size()) {
        throw Error(Errc::dimension_mismatch, "FFT buffer size mismatch");
    }
    fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

void RealPlan2D::inverse(ComplexBuffer& in, RealBuffer& out) const {
    if (in.size() != complex_size() || out.size() != real_size()) {
        throw Error(Errc::dimension_mismatch, "FFT buffer size mismatch");
    }
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

int good_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7}) {
            while (r % p == 0) {
                r /= p;
            }
        }
        if (r == 1) {
            return m;
        }
    }
}

}  // namespace turbkit::fft
