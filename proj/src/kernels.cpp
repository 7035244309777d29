#include "censreg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace censreg::kernels {

#ifndef CENSREG_HAVE_AVX2
namespace avx2 {
double dot(const double*, const double*, std::size_t) {
  throw std::logic_error("AVX2 kernels not compiled in");
}
double weighted_dot(const double*, const double*, const double*, std::size_t) {
  throw std::logic_error("AVX2 kernels not compiled in");
}
void axpy(double, const double*, double*, std::size_t) {
  throw std::logic_error("AVX2 kernels not compiled in");
}
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CENSREG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect_default() {
  if (const char* env = std::getenv("CENSREG_ISA")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_default()};
  return isa;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operands differ in length");
}

}  // namespace

std::string_view to_string(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
  return isa == Isa::Scalar || cpu_has_avx2();
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("ISA " + std::string(to_string(isa)) + " not supported here");
  }
  active().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active_isa() == Isa::Avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                   : scalar::dot(a.data(), b.data(), a.size());
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w) {
  check_sizes(a.size(), b.size());
  check_sizes(a.size(), w.size());
  return active_isa() == Isa::Avx2
             ? avx2::weighted_dot(a.data(), b.data(), w.data(), a.size())
             : scalar::weighted_dot(a.data(), b.data(), w.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
  if (active_isa() == Isa::Avx2) {
    avx2::axpy(alpha, x.data(), y.data(), x.size());
  } else {
    scalar::axpy(alpha, x.data(), y.data(), x.size());
  }
}

void weighted_gram(std::span<const double> x_colmajor, std::size_t n, std::size_t k,
                   std::span<const double> w, std::span<double> out) {
  check_sizes(x_colmajor.size(), n * k);
  check_sizes(w.size(), n);
  check_sizes(out.size(), k * k);
  for (std::size_t j = 0; j < k; ++j) {
    auto cj = x_colmajor.subspan(j * n, n);
    for (std::size_t l = 0; l <= j; ++l) {
      auto cl = x_colmajor.subspan(l * n, n);
      const double s = weighted_dot(cj, cl, w);
      out[j * k + l] = s;
      out[l * k + j] = s;
    }
  }
}

}  // namespace censreg::kernels
