#pragma once

// Data-parallel inner loops shared by the estimators. Every kernel has a
// scalar reference implementation; wider variants are picked at runtime
// from what the CPU reports and must agree with the reference to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace censreg::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// True when the variant was compiled in and the running CPU can execute it.
bool isa_supported(Isa isa);

// Variant used by the dispatching entry points below. Defaults to the widest
// supported ISA; CENSREG_ISA=scalar in the environment forces the reference.
Isa active_isa();

// Throws std::invalid_argument for an unsupported ISA.
void set_active_isa(Isa isa);

// sum_i a_i * b_i
double dot(std::span<const double> a, std::span<const double> b);

// sum_i w_i * a_i * b_i
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// out(j, l) = sum_i w_i * X(i, j) * X(i, l) for a column-major n x k matrix;
// out is k x k column-major and symmetric on return.
void weighted_gram(std::span<const double> x_colmajor, std::size_t n, std::size_t k,
                   std::span<const double> w, std::span<double> out);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double weighted_dot(const double* a, const double* b, const double* w, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
// Only callable when isa_supported(Isa::Avx2).
double dot(const double* a, const double* b, std::size_t n);
double weighted_dot(const double* a, const double* b, const double* w, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace censreg::kernels
