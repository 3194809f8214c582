#pragma once

#include "protosel/dissim.hpp"
#include "protosel/error.hpp"
#include "protosel/matrix.hpp"
#include "protosel/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace protosel {

/// Pivots with trained radii plus, once attached, the object-to-pivot
/// dissimilarity codes used as a cheap intermediate representation.
///
/// Radii are kept for compatibility with thresholded (binary) codes but the
/// dissimilarity codes are never thresholded here.
struct PivotTable {
    std::vector<std::size_t> pivot_indices;
    std::vector<double> radii;
    /// Row r holds d(object, pivot_j) for the object mapped to r by `code_row`.
    Matrix codes;
    /// Provider index -> row of `codes`, or -1 when the object is not encoded.
    std::vector<std::int64_t> code_row;
    std::uint64_t dataset_revision = 0;

    std::size_t pivots() const noexcept { return pivot_indices.size(); }

    bool has_code(std::size_t object) const noexcept { return object < code_row.size() && code_row[object] >= 0; }

    std::span<const double> code(std::size_t object) const {
        require(has_code(object), ErrorKind::Stale, "object " + std::to_string(object) + " has no pivot code");
        return codes.row(static_cast<std::size_t>(code_row[object]));
    }
};

struct PivotOptions {
    /// Training uses at most this many sample objects.
    std::size_t sample_cap = 10000;
    bool require_power_of_two = true;
};

namespace detail {

inline double median(std::vector<double> values) {
    const std::size_t m = values.size();
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(m / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (m % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

struct SphereColumn {
    std::vector<double> dists;
    double radius = 0.0;
    std::vector<std::uint64_t> inside;
};

inline SphereColumn train_sphere(const DissimilarityProvider& provider, std::span<const std::size_t> sample,
                                 std::size_t pivot) {
    SphereColumn col;
    col.dists.resize(sample.size());
    for (std::size_t s = 0; s < sample.size(); ++s) col.dists[s] = provider.dist_unchecked(sample[s], pivot);
    col.radius = median(col.dists);
    require(col.radius > 0.0, ErrorKind::Degenerate,
            "pivot " + std::to_string(pivot) + " has zero radius: sample is degenerate around it");
    col.inside.assign((sample.size() + 63) / 64, 0);
    for (std::size_t s = 0; s < sample.size(); ++s)
        if (col.dists[s] <= col.radius) col.inside[s / 64] |= std::uint64_t{1} << (s % 64);
    return col;
}

inline std::size_t overlap(const SphereColumn& a, const SphereColumn& b) {
    std::size_t c = 0;
    for (std::size_t w = 0; w < a.inside.size(); ++w) c += static_cast<std::size_t>(std::popcount(a.inside[w] & b.inside[w]));
    return c;
}

} // namespace detail

/// Draws p distinct pivots from the sample, sets each radius to the median
/// pivot distance over the sample (so about half the sample is inside each
/// sphere), then runs up to `max_rounds` balancing rounds: while the most
/// overlapping pivot pair shares more than 1.5x the ideal m/4 objects, both
/// pivots are replaced by fresh random sample objects.
inline PivotTable train_pivots(const DissimilarityProvider& provider, std::span<const std::size_t> sample,
                               std::size_t p, std::uint64_t seed, std::size_t max_rounds = 16,
                               const PivotOptions& options = {}) {
    require(p >= 1, ErrorKind::InvalidArgument, "need at least one pivot");
    require(!options.require_power_of_two || std::has_single_bit(p), ErrorKind::InvalidArgument,
            "pivot count " + std::to_string(p) + " is not a power of two");
    provider.check_indices(sample);

    std::vector<std::size_t> pool;
    {
        std::unordered_set<std::size_t> seen;
        for (auto s : sample)
            if (seen.insert(s).second) pool.push_back(s);
    }
    auto rng = make_rng(seed, {tag("pivots")});
    if (pool.size() > options.sample_cap) {
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(options.sample_cap);
        std::sort(pool.begin(), pool.end());
    }
    require(pool.size() >= p, ErrorKind::InvalidArgument,
            "sample of " + std::to_string(pool.size()) + " distinct objects is smaller than p=" + std::to_string(p));

    // Candidate order for pivot draws; pivots consume it front to back.
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t next = 0;

    std::vector<std::size_t> pivots;
    std::vector<detail::SphereColumn> columns;
    for (; pivots.size() < p; ++next) {
        pivots.push_back(pool[order[next]]);
        columns.push_back(detail::train_sphere(provider, pool, pivots.back()));
    }

    const double limit = 1.5 * static_cast<double>(pool.size()) / 4.0;
    for (std::size_t round = 0; round < max_rounds && p >= 2 && next + 2 <= order.size(); ++round) {
        std::size_t best_a = 0, best_b = 1, best = 0;
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a + 1; b < p; ++b) {
                const auto o = detail::overlap(columns[a], columns[b]);
                if (o > best) {
                    best = o;
                    best_a = a;
                    best_b = b;
                }
            }
        if (static_cast<double>(best) <= limit) break;
        for (auto slot : {best_a, best_b}) {
            pivots[slot] = pool[order[next++]];
            columns[slot] = detail::train_sphere(provider, pool, pivots[slot]);
        }
    }

    PivotTable table;
    table.pivot_indices = std::move(pivots);
    for (const auto& c : columns) table.radii.push_back(c.radius);
    table.dataset_revision = provider.revision();
    return table;
}

inline void check_revision(const DissimilarityProvider& provider, const PivotTable& table) {
    require(table.dataset_revision == provider.revision(), ErrorKind::Stale,
            "pivot table was built for a different dataset revision");
}

/// |objects| x p matrix with entry (a, j) = d(objects[a], pivot_j).
inline Matrix encode(const DissimilarityProvider& provider, const PivotTable& table,
                     std::span<const std::size_t> objects) {
    check_revision(provider, table);
    return provider.dist_block(objects, table.pivot_indices);
}

/// Encodes `objects` and stores the codes in the table for later lookup.
inline void attach_codes(const DissimilarityProvider& provider, PivotTable& table,
                         std::span<const std::size_t> objects) {
    std::vector<std::size_t> fresh;
    table.code_row.resize(provider.size(), -1);
    {
        std::unordered_set<std::size_t> seen;
        for (auto o : objects)
            if (o < table.code_row.size() && table.code_row[o] < 0 && seen.insert(o).second) fresh.push_back(o);
    }
    Matrix add = encode(provider, table, fresh);
    const std::size_t base = table.codes.rows();
    auto data = std::move(table.codes.data());
    data.insert(data.end(), add.data().begin(), add.data().end());
    table.codes = Matrix(base + fresh.size(), table.pivots(), std::move(data));
    for (std::size_t r = 0; r < fresh.size(); ++r) table.code_row[fresh[r]] = static_cast<std::int64_t>(base + r);
}

namespace detail {

inline std::size_t nearest_row(std::span<const double> x, const Matrix& rows) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto y = rows.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - y[j];
            s += d * d;
        }
        if (s < best_d) {
            best_d = s;
            best = r;
        }
    }
    return best;
}

} // namespace detail

/// For each row of `codes_v`, the index of the Euclidean-nearest row of
/// `codes_r` in pivot space; ties go to the lowest index.
inline std::vector<std::size_t> approx_nearest_prototype(const Matrix& codes_v, const Matrix& codes_r) {
    require(codes_v.cols() == codes_r.cols(), ErrorKind::InvalidArgument,
            "pivot dimension mismatch: " + std::to_string(codes_v.cols()) + " vs " + std::to_string(codes_r.cols()));
    require(codes_r.rows() >= 1, ErrorKind::InvalidArgument, "no prototype codes");
    std::vector<std::size_t> out(codes_v.rows());
    for (std::size_t i = 0; i < codes_v.rows(); ++i) out[i] = detail::nearest_row(codes_v.row(i), codes_r);
    return out;
}

/// Pivots, radii and revision; codes are recomputed on load.
inline nlohmann::json to_json(const PivotTable& table) {
    return {{"pivot_indices", table.pivot_indices},
            {"radii", table.radii},
            {"dataset_revision", table.dataset_revision}};
}

inline PivotTable pivot_table_from_json(const nlohmann::json& j) {
    PivotTable t;
    try {
        t.pivot_indices = j.at("pivot_indices").get<std::vector<std::size_t>>();
        t.radii = j.at("radii").get<std::vector<double>>();
        t.dataset_revision = j.at("dataset_revision").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad pivot table: ") + e.what());
    }
    require(t.pivot_indices.size() == t.radii.size(), ErrorKind::Parse, "pivot/radius count mismatch");
    return t;
}

inline void save_pivots(const PivotTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << to_json(table).dump(2) << '\n';
}

inline PivotTable load_pivots(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return pivot_table_from_json(j);
}

} // namespace protosel
