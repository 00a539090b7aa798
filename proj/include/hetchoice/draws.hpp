#pragma once

#include <filesystem>
#include <vector>

#include "hetchoice/common.hpp"
#include "hetchoice/model_spec.hpp"

namespace hetchoice {

/// Per-individual standard-normal deviates, shape (n_individuals, R, n_dims).
/// Regenerating with an identical DrawConfig yields identical values.
struct DrawSet {
    int n_individuals = 0;
    int R = 0;
    int n_dims = 0;
    std::vector<double> values;  // [(i*R + r)*n_dims + d]

    double at(int individual, int r, int dim) const {
        return values[(static_cast<std::size_t>(individual) * R + r) * n_dims + dim];
    }
};

/// Radical inverse of `index` (>= 1) in a prime base.
double halton_sequence(long long index, int base);

/// Standard-normal quantile; |Phi(z) - p| <= 1e-9 absolute over (0,1).
double inverse_normal_cdf(double p);

/// Halton method: dimension d uses the d-th configured prime base, and
/// individual i consumes the contiguous index block
/// [burn_in + i*R + 1, burn_in + (i+1)*R] of that base's sequence.
/// Pseudo method: counter-based generator keyed on (seed, i, r, d).
DrawSet standard_normal_draws(int n_individuals, const DrawConfig& config, int n_dims,
                              int threads = 1);

/// Audit export with columns individual_index, draw_index, dimension, value.
void save_draws_csv(const DrawSet& draws, const std::filesystem::path& path);

}  // namespace hetchoice
