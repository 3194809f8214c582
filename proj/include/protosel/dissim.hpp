#pragma once

#include "protosel/dataset.hpp"
#include "protosel/error.hpp"
#include "protosel/matrix.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

namespace protosel {

/// A dissimilarity from the Minkowski family.
struct Measure {
    enum class Kind { Euclidean, Manhattan, Minkowski };

    Kind kind = Kind::Euclidean;
    double p = 2.0;

    static Measure euclidean() { return {Kind::Euclidean, 2.0}; }
    static Measure manhattan() { return {Kind::Manhattan, 1.0}; }
    static Measure minkowski(double p) {
        require(p >= 1.0, ErrorKind::InvalidArgument, "minkowski exponent must be >= 1");
        return {Kind::Minkowski, p};
    }

    /// Accepts "euclidean", "manhattan" or "minkowski:<p>".
    static Measure parse(const std::string& text) {
        if (text == "euclidean") return euclidean();
        if (text == "manhattan") return manhattan();
        if (text.rfind("minkowski:", 0) == 0) {
            bool ok = false;
            double p = detail::parse_double(std::string_view(text).substr(10), ok);
            require(ok, ErrorKind::Parse, "bad minkowski exponent in '" + text + "'");
            return minkowski(p);
        }
        fail(ErrorKind::Parse, "unknown measure '" + text + "'");
    }

    std::string name() const {
        switch (kind) {
        case Kind::Euclidean: return "euclidean";
        case Kind::Manhattan: return "manhattan";
        case Kind::Minkowski: return "minkowski:" + detail::format_double(p);
        }
        return "?";
    }

    double operator()(std::span<const double> a, std::span<const double> b) const noexcept {
        const std::size_t q = a.size();
        double s = 0.0;
        switch (kind) {
        case Kind::Euclidean:
            for (std::size_t j = 0; j < q; ++j) {
                const double d = a[j] - b[j];
                s += d * d;
            }
            return std::sqrt(s);
        case Kind::Manhattan:
            for (std::size_t j = 0; j < q; ++j) s += std::abs(a[j] - b[j]);
            return s;
        case Kind::Minkowski:
            for (std::size_t j = 0; j < q; ++j) s += std::pow(std::abs(a[j] - b[j]), p);
            return std::pow(s, 1.0 / p);
        }
        return 0.0;
    }
};

/// Serves d(i, j) over a fixed index space, either computed on demand from a
/// dataset, memoized in a bounded LRU store, or looked up in a precomputed matrix.
///
/// `evaluations()` counts genuine measure evaluations only: diagonal requests,
/// cache hits and matrix lookups are free. Safe for concurrent callers.
class DissimilarityProvider {
public:
    enum class Source { OnDemand, Cached, Precomputed };

    static DissimilarityProvider on_demand(std::shared_ptr<const Dataset> data, Measure measure) {
        require(data != nullptr, ErrorKind::InvalidArgument, "null dataset");
        DissimilarityProvider p(Source::OnDemand);
        p.n_ = data->size();
        p.revision_ = data->revision();
        p.data_ = std::move(data);
        p.measure_ = measure;
        return p;
    }

    static DissimilarityProvider cached(std::shared_ptr<const Dataset> data, Measure measure, std::size_t capacity) {
        require(capacity >= 1, ErrorKind::InvalidArgument, "cache capacity must be >= 1");
        auto p = on_demand(std::move(data), measure);
        p.source_ = Source::Cached;
        p.state_->capacity = capacity;
        return p;
    }

    /// Wraps a square matrix. Rejects asymmetry beyond 1e-9 and nonzero diagonals.
    static DissimilarityProvider precomputed(Matrix matrix, std::uint64_t revision = 0) {
        require(matrix.rows() == matrix.cols() && matrix.rows() >= 1, ErrorKind::InvalidArgument,
                "precomputed dissimilarities must be a nonempty square matrix");
        const std::size_t n = matrix.rows();
        for (std::size_t i = 0; i < n; ++i) {
            require(matrix(i, i) == 0.0, ErrorKind::InvalidArgument,
                    "nonzero diagonal at " + std::to_string(i));
            for (std::size_t j = i + 1; j < n; ++j) {
                require(std::abs(matrix(i, j) - matrix(j, i)) <= 1e-9, ErrorKind::InvalidArgument,
                        "asymmetric entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
                require(matrix(i, j) >= 0.0, ErrorKind::InvalidArgument, "negative dissimilarity");
            }
        }
        DissimilarityProvider p(Source::Precomputed);
        p.n_ = n;
        p.revision_ = revision;
        p.matrix_ = std::move(matrix);
        return p;
    }

    DissimilarityProvider(DissimilarityProvider&&) noexcept = default;
    DissimilarityProvider& operator=(DissimilarityProvider&&) noexcept = default;

    Source source() const noexcept { return source_; }
    std::size_t size() const noexcept { return n_; }
    std::uint64_t revision() const noexcept { return revision_; }
    const Measure& measure() const noexcept { return measure_; }
    /// Null for precomputed providers.
    const Dataset* dataset() const noexcept { return data_.get(); }

    std::uint64_t evaluations() const noexcept { return state_->evaluations.load(std::memory_order_relaxed); }
    std::uint64_t cache_hits() const noexcept { return state_->hits.load(std::memory_order_relaxed); }

    double dist(std::size_t i, std::size_t j) const {
        require(i < n_ && j < n_, ErrorKind::OutOfRange,
                "object index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for n=" +
                    std::to_string(n_));
        return dist_unchecked(i, j);
    }

    Matrix dist_block(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
        check_indices(rows);
        check_indices(cols);
        Matrix out(rows.size(), cols.size());
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = dist_unchecked(rows[a], cols[b]);
        return out;
    }

    void check_indices(std::span<const std::size_t> idx) const {
        for (auto i : idx)
            require(i < n_, ErrorKind::OutOfRange,
                    "object index " + std::to_string(i) + " out of range for n=" + std::to_string(n_));
    }

    double dist_unchecked(std::size_t i, std::size_t j) const {
        if (i == j) return 0.0;
        switch (source_) {
        case Source::Precomputed: return matrix_(i, j);
        case Source::OnDemand: return evaluate(i, j);
        case Source::Cached: break;
        }
        const auto key = pair_key(i, j);
        {
            std::lock_guard lock(state_->mutex);
            auto it = state_->index.find(key);
            if (it != state_->index.end()) {
                state_->lru.splice(state_->lru.begin(), state_->lru, it->second);
                state_->hits.fetch_add(1, std::memory_order_relaxed);
                return it->second->second;
            }
        }
        const double value = evaluate(i, j);
        std::lock_guard lock(state_->mutex);
        if (state_->index.find(key) == state_->index.end()) {
            state_->lru.emplace_front(key, value);
            state_->index[key] = state_->lru.begin();
            if (state_->lru.size() > state_->capacity) {
                state_->index.erase(state_->lru.back().first);
                state_->lru.pop_back();
            }
        }
        return value;
    }

private:
    struct State {
        std::atomic<std::uint64_t> evaluations{0};
        std::atomic<std::uint64_t> hits{0};
        std::mutex mutex;
        std::size_t capacity = 0;
        std::list<std::pair<std::uint64_t, double>> lru;
        std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, double>>::iterator> index;
    };

    explicit DissimilarityProvider(Source source) : source_(source), state_(std::make_unique<State>()) {}

    static std::uint64_t pair_key(std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
    }

    double evaluate(std::size_t i, std::size_t j) const {
        state_->evaluations.fetch_add(1, std::memory_order_relaxed);
        return measure_(data_->object(i), data_->object(j));
    }

    Source source_;
    std::size_t n_ = 0;
    std::uint64_t revision_ = 0;
    std::shared_ptr<const Dataset> data_;
    Measure measure_;
    Matrix matrix_;
    std::unique_ptr<State> state_;
};

/// Materializes the full n*n matrix. Refuses when it would exceed the budget.
inline DissimilarityProvider precompute(std::shared_ptr<const Dataset> data, Measure measure,
                                        std::size_t memory_budget_bytes = std::size_t{1} << 30) {
    require(data != nullptr && !data->empty(), ErrorKind::InvalidArgument, "precompute needs a nonempty dataset");
    const std::size_t n = data->size();
    require(n <= memory_budget_bytes / sizeof(double) / n, ErrorKind::Resource,
            "full dissimilarity matrix for n=" + std::to_string(n) + " exceeds the memory budget of " +
                std::to_string(memory_budget_bytes) + " bytes");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = measure(data->object(i), data->object(j));
    return DissimilarityProvider::precomputed(std::move(m), data->revision());
}

/// Reads a square matrix stored in the packed binary dataset format (q == n).
inline DissimilarityProvider load_precomputed(const std::filesystem::path& path) {
    auto ds = load_binary(path);
    require(ds.size() == ds.dimension(), ErrorKind::Parse,
            path.string() + ": matrix is " + std::to_string(ds.size()) + "x" + std::to_string(ds.dimension()) +
                ", expected square");
    return DissimilarityProvider::precomputed(ds.objects(), ds.revision());
}

} // namespace protosel
