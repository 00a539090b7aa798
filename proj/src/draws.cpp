#include "hetchoice/draws.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace hetchoice {

namespace {

std::vector<int> first_primes(int count) {
    std::vector<int> primes;
    for (int n = 2; static_cast<int>(primes.size()) < count; ++n) {
        bool prime = true;
        for (int d = 2; d * d <= n; ++d)
            if (n % d == 0) {
                prime = false;
                break;
            }
        if (prime) primes.push_back(n);
    }
    return primes;
}

}  // namespace

double halton_sequence(long long index, int base) {
    if (base < 2) throw NumericError("halton base must be at least 2");
    if (index < 1) throw NumericError("halton index must be at least 1");
    double inv = 1.0 / base, f = inv, x = 0.0;
    long long n = index;
    while (n > 0) {
        x += static_cast<double>(n % base) * f;
        n /= base;
        f *= inv;
    }
    return x;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("inverse_normal_cdf needs p in (0,1)");

    // Acklam's rational approximation, then one Halley step against the exact
    // CDF computed through erfc.
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

DrawSet standard_normal_draws(int n_individuals, const DrawConfig& config, int n_dims,
                              int threads) {
    if (n_individuals < 0) throw NumericError("n_individuals must be non-negative");
    if (config.count < 1) throw NumericError("draw count R must be at least 1");
    if (n_dims < 0) throw NumericError("n_dims must be non-negative");

    std::vector<int> bases = config.bases.empty() ? first_primes(n_dims) : config.bases;
    if (config.method == DrawConfig::Method::Halton &&
        static_cast<int>(bases.size()) < n_dims)
        throw NumericError("draw config provides " + std::to_string(bases.size()) +
                           " halton bases for " + std::to_string(n_dims) + " dimensions");

    DrawSet set;
    set.n_individuals = n_individuals;
    set.R = config.count;
    set.n_dims = n_dims;
    set.values.assign(static_cast<std::size_t>(n_individuals) * config.count * n_dims, 0.0);
    if (n_dims == 0 || n_individuals == 0) return set;

    const int R = config.count;
    parallel_for_deterministic(static_cast<std::size_t>(n_individuals), threads, [&](std::size_t i) {
        for (int r = 0; r < R; ++r) {
            for (int d = 0; d < n_dims; ++d) {
                double u;
                if (config.method == DrawConfig::Method::Halton) {
                    long long index = config.burn_in + static_cast<long long>(i) * R + r + 1;
                    u = halton_sequence(index, bases[d]);
                } else {
                    RngStream stream(config.seed, i, (static_cast<std::uint64_t>(r) << 16) + d);
                    u = stream.next_u01();
                }
                set.values[(i * R + r) * n_dims + d] = inverse_normal_cdf(u);
            }
        }
    });
    return set;
}

void save_draws_csv(const DrawSet& draws, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot write '" + path.string() + "'");
    out << "individual_index,draw_index,dimension,value\n";
    char buf[32];
    for (int i = 0; i < draws.n_individuals; ++i)
        for (int r = 0; r < draws.R; ++r)
            for (int d = 0; d < draws.n_dims; ++d) {
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), draws.at(i, r, d));
                out << i << ',' << r << ',' << d << ',' << std::string_view(buf, ptr - buf) << '\n';
            }
}

}  // namespace hetchoice
