#pragma once

// Data-parallel kernels. Each kernel has an OpenMP implementation (omp::) and
// a plain serial reference (serial::) that must produce bit-identical output;
// tests compare the two and bench/ times them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tgiqa/tensor_io.hpp"
#include "tgiqa/tg_iqa.hpp"

namespace tgiqa::kernels {

/// Statistic over a resampled or permuted index vector.
using IndexStatistic = std::function<double(std::span<const std::size_t>)>;

/// Fills one row of an output frame; `row` is the row index.
using RowFiller = std::function<void(std::size_t row, std::span<double> out)>;

/// Draws `count` indices uniformly with replacement from [0, n) using the
/// stream keyed by (seed, resample).
void bootstrap_indices(std::uint64_t seed, std::size_t resample, std::size_t n, std::span<std::size_t> out);

/// Fisher-Yates permutation of [0, n) keyed by (seed, permutation).
void permutation_indices(std::uint64_t seed, std::size_t permutation, std::span<std::size_t> out);

namespace omp {
TensorF32 similarity_matrix(const TensorF32& z, const TensorF32& w);
std::vector<QualityTriple> quality_rows(const TensorF32& scores, double temperature);
std::vector<double> resample_statistics(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                        const IndexStatistic& stat);
std::vector<double> permutation_statistics(std::size_t n, std::size_t permutations, std::uint64_t seed,
                                           const IndexStatistic& stat);
std::vector<double> fill_rows(std::size_t rows, std::size_t cols, const RowFiller& fill);
}  // namespace omp

namespace serial {
TensorF32 similarity_matrix(const TensorF32& z, const TensorF32& w);
std::vector<QualityTriple> quality_rows(const TensorF32& scores, double temperature);
std::vector<double> resample_statistics(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                        const IndexStatistic& stat);
std::vector<double> permutation_statistics(std::size_t n, std::size_t permutations, std::uint64_t seed,
                                           const IndexStatistic& stat);
std::vector<double> fill_rows(std::size_t rows, std::size_t cols, const RowFiller& fill);
}  // namespace serial

}  // namespace tgiqa::kernels
