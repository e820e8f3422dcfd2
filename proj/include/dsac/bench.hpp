#pragma once

/*! \file
 * \brief Size of a compressed revocation list as a function of the share of
 * revoked credentials.
 */

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

namespace dsac {

struct BenchRow {
    double density = 0;
    std::size_t raw_bytes = 0;
    double compressed_bytes_mean = 0;
    double compressed_bytes_stddev = 0;
    std::vector<std::size_t> samples;
};

/// For each density and seed, sets round(density * bits) distinct random
/// bits of a zeroed list and records the gzip size.
std::vector<BenchRow> run_revocation_bench(std::size_t bits, const std::vector<double>& densities,
                                           std::size_t seeds, std::uint64_t base_seed = 1);

/// Means never decrease along the given density order.
bool means_non_decreasing(const std::vector<BenchRow>& rows);

/// density,raw_bytes,compressed_bytes_mean,compressed_bytes_stddev
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

/// Whitespace-separated columns with a '#' header line, for gnuplot.
void write_bench_gnuplot(std::ostream& out, const std::vector<BenchRow>& rows);

} // namespace dsac
