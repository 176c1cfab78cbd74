#ifndef T1_COMMON_HPP
#define T1_COMMON_HPP

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace t1 {

#ifdef T1_REAL_FLOAT
using real_t = float;
#else
using real_t = double;
#endif

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// printf-style formatting into a std::string, used for error messages.
template <typename... Args>
std::string strf(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    return std::string(buf);
}

// When true (the default), every tensor op validates that its output is
// finite and throws NumericError otherwise.
bool finite_checks_enabled();
void set_finite_checks(bool on);

// Worker cap from the T1_THREADS environment variable, clamped to [1, hw].
// All results are thread-count independent by construction (per-task seeds,
// preassigned output slots), so this only affects wall time.
int max_threads();

}  // namespace t1

#endif
