#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace unfold {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

// Default tolerances: algebraic operations (root finding, residues) and
// dynamical ones (orbit sums, flow integration).
inline constexpr double tol_algebraic = 1e-12;
inline constexpr double tol_dynamical = 1e-8;

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct schema_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double sq(double v) { return v * v; }

// Angle reduced to [0, 2*pi).
inline double norm_angle(double a) {
    a = std::fmod(a, 2 * pi);
    if (a < 0) a += 2 * pi;
    if (a >= 2 * pi) a = 0;
    return a;
}

// Angle class modulo pi, reduced to [0, pi).
inline double norm_angle_pi(double a) {
    a = std::fmod(a, pi);
    if (a < 0) a += pi;
    if (a >= pi) a = 0;
    return a;
}

// Distance between two mod-pi angle classes.
inline double dist_mod_pi(double a, double b) {
    double d = std::fabs(norm_angle_pi(a) - norm_angle_pi(b));
    return std::min(d, pi - d);
}

inline double dist_mod_2pi(double a, double b) {
    double d = std::fabs(norm_angle(a) - norm_angle(b));
    return std::min(d, 2 * pi - d);
}

inline cplx unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Deterministic splitmix64 generator; one seed drives every randomized sweep.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() {  // [0,1)
        return double(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
    }
    cplx disk(double radius = 1.0) {
        double r = std::sqrt(uniform()) * radius;
        double a = uniform(0, 2 * pi);
        return r * unit(a);
    }
};

// Worker pool width: UNFOLD_THREADS caps the hardware count.
int worker_count();

// Runs f(i) for i in [0, n) on the worker pool; exceptions are collected and
// the first one rethrown after the batch completes.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

// 17 significant digits reproduces a double exactly on re-parse.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt17(cplx v) { return fmt17(v.real()) + "," + fmt17(v.imag()); }

inline int worker_count() {
    if (const char* env = std::getenv("UNFOLD_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    int workers = std::min<std::size_t>(std::size_t(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mtx;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mtx);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace unfold
