#include "dsac/bench.hpp"

#include "dsac/status_list.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace dsac {

std::vector<BenchRow> run_revocation_bench(std::size_t bits, const std::vector<double>& densities,
                                           std::size_t seeds, std::uint64_t base_seed) {
    std::vector<BenchRow> rows;
    for (double density : densities) {
        BenchRow row;
        row.density = density;
        row.raw_bytes = (bits + 7) / 8;
        const auto revoked = static_cast<std::size_t>(std::llround(density * static_cast<double>(bits)));
        for (std::size_t s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(base_seed + s);
            std::uniform_int_distribution<std::size_t> pick(0, bits - 1);
            Bitstring list(bits);
            // Rejection sampling while sparse, a partial shuffle once dense.
            if (revoked * 4 <= bits) {
                while (list.count() < revoked) {
                    for (std::size_t need = revoked - list.count(); need > 0; --need) list.set(pick(rng));
                }
            } else {
                std::vector<std::size_t> idx(bits);
                std::iota(idx.begin(), idx.end(), std::size_t{0});
                for (std::size_t i = 0; i < revoked; ++i) {
                    std::uniform_int_distribution<std::size_t> j(i, bits - 1);
                    std::swap(idx[i], idx[j(rng)]);
                    list.set(idx[i]);
                }
            }
            row.samples.push_back(compress_list(list).size());
        }
        const double n = static_cast<double>(row.samples.size());
        for (auto v : row.samples) row.compressed_bytes_mean += static_cast<double>(v) / n;
        double var = 0;
        for (auto v : row.samples) var += std::pow(static_cast<double>(v) - row.compressed_bytes_mean, 2);
        row.compressed_bytes_stddev = row.samples.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

bool means_non_decreasing(const std::vector<BenchRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].compressed_bytes_mean < rows[i - 1].compressed_bytes_mean) return false;
    return true;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "density,raw_bytes,compressed_bytes_mean,compressed_bytes_stddev\n";
    for (const auto& r : rows)
        out << r.density << ',' << r.raw_bytes << ',' << r.compressed_bytes_mean << ',' << r.compressed_bytes_stddev
            << '\n';
}

void write_bench_gnuplot(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "# density raw_bytes compressed_bytes_mean compressed_bytes_stddev\n";
    for (const auto& r : rows)
        out << r.density << ' ' << r.raw_bytes << ' ' << r.compressed_bytes_mean << ' ' << r.compressed_bytes_stddev
            << '\n';
}

} // namespace dsac
