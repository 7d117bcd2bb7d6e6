#include <numeric>

#include "tgiqa/kernels.hpp"
#include "tgiqa/rng.hpp"

namespace tgiqa::kernels {

void bootstrap_indices(std::uint64_t seed, std::size_t resample, std::size_t n, std::span<std::size_t> out) {
    rng::Stream stream(rng::derive(rng::derive(seed, "bootstrap"), resample));
    for (auto& idx : out) idx = static_cast<std::size_t>(stream.below(n));
}

void permutation_indices(std::uint64_t seed, std::size_t permutation, std::span<std::size_t> out) {
    std::iota(out.begin(), out.end(), std::size_t{0});
    rng::Stream stream(rng::derive(rng::derive(seed, "permutation"), permutation));
    for (std::size_t i = out.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(stream.below(i));
        std::swap(out[i - 1], out[j]);
    }
}

namespace serial {

TensorF32 similarity_matrix(const TensorF32& z, const TensorF32& w) {
    TensorF32 s(z.rows, w.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const auto zi = z.row(i);
        for (std::size_t k = 0; k < w.rows; ++k) {
            const auto wk = w.row(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < z.cols; ++j) acc += static_cast<double>(zi[j]) * wk[j];
            s.at(i, k) = static_cast<float>(acc);
        }
    }
    return s;
}

std::vector<QualityTriple> quality_rows(const TensorF32& scores, double temperature) {
    std::vector<QualityTriple> out(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) out[i] = quality_from_row(scores.row(i), temperature);
    return out;
}

std::vector<double> resample_statistics(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                        const IndexStatistic& stat) {
    std::vector<double> out(resamples);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < resamples; ++b) {
        bootstrap_indices(seed, b, n, idx);
        out[b] = stat(idx);
    }
    return out;
}

std::vector<double> permutation_statistics(std::size_t n, std::size_t permutations, std::uint64_t seed,
                                           const IndexStatistic& stat) {
    std::vector<double> out(permutations);
    std::vector<std::size_t> idx(n);
    for (std::size_t p = 0; p < permutations; ++p) {
        permutation_indices(seed, p, idx);
        out[p] = stat(idx);
    }
    return out;
}

std::vector<double> fill_rows(std::size_t rows, std::size_t cols, const RowFiller& fill) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) fill(r, std::span(out.data() + r * cols, cols));
    return out;
}

}  // namespace serial
}  // namespace tgiqa::kernels
