#include <exception>

#include "tgiqa/kernels.hpp"

namespace tgiqa::kernels::omp {

namespace {

// Exceptions must not cross an OpenMP region; keep the first one (lowest
// iteration index) and rethrow after the loop so the error is deterministic.
class FirstError {
public:
    void record(std::ptrdiff_t index, std::exception_ptr e) {
#pragma omp critical(tgiqa_first_error)
        {
            if (!error_ || index < index_) {
                error_ = e;
                index_ = index;
            }
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::exception_ptr error_;
    std::ptrdiff_t index_ = 0;
};

}  // namespace

TensorF32 similarity_matrix(const TensorF32& z, const TensorF32& w) {
    TensorF32 s(z.rows, w.rows);
    const auto n = static_cast<std::ptrdiff_t>(z.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto zi = z.row(static_cast<std::size_t>(i));
        auto si = s.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < w.rows; ++k) {
            const auto wk = w.row(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < z.cols; ++j) acc += static_cast<double>(zi[j]) * wk[j];
            si[k] = static_cast<float>(acc);
        }
    }
    return s;
}

std::vector<QualityTriple> quality_rows(const TensorF32& scores, double temperature) {
    std::vector<QualityTriple> out(scores.rows);
    const auto n = static_cast<std::ptrdiff_t>(scores.rows);
    FirstError first;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = quality_from_row(scores.row(static_cast<std::size_t>(i)), temperature);
        } catch (...) {
            first.record(i, std::current_exception());
        }
    }
    first.rethrow();
    return out;
}

std::vector<double> resample_statistics(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                        const IndexStatistic& stat) {
    std::vector<double> out(resamples);
    const auto count = static_cast<std::ptrdiff_t>(resamples);
    FirstError first;
#pragma omp parallel
    {
        std::vector<std::size_t> idx(n);
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t b = 0; b < count; ++b) {
            try {
                bootstrap_indices(seed, static_cast<std::size_t>(b), n, idx);
                out[static_cast<std::size_t>(b)] = stat(idx);
            } catch (...) {
                first.record(b, std::current_exception());
            }
        }
    }
    first.rethrow();
    return out;
}

std::vector<double> permutation_statistics(std::size_t n, std::size_t permutations, std::uint64_t seed,
                                           const IndexStatistic& stat) {
    std::vector<double> out(permutations);
    const auto count = static_cast<std::ptrdiff_t>(permutations);
    FirstError first;
#pragma omp parallel
    {
        std::vector<std::size_t> idx(n);
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t p = 0; p < count; ++p) {
            try {
                permutation_indices(seed, static_cast<std::size_t>(p), idx);
                out[static_cast<std::size_t>(p)] = stat(idx);
            } catch (...) {
                first.record(p, std::current_exception());
            }
        }
    }
    first.rethrow();
    return out;
}

std::vector<double> fill_rows(std::size_t rows, std::size_t cols, const RowFiller& fill) {
    std::vector<double> out(rows * cols);
    const auto n = static_cast<std::ptrdiff_t>(rows);
    FirstError first;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        try {
            fill(static_cast<std::size_t>(r), std::span(out.data() + static_cast<std::size_t>(r) * cols, cols));
        } catch (...) {
            first.record(r, std::current_exception());
        }
    }
    first.rethrow();
    return out;
}

}  // namespace tgiqa::kernels::omp
