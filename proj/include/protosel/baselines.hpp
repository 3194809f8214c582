#pragma once

#include "protosel/dissim.hpp"
#include "protosel/dspace.hpp"
#include "protosel/error.hpp"
#include "protosel/fitness.hpp"
#include "protosel/ga.hpp"
#include "protosel/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace protosel {

namespace detail {

inline void check_pool(std::span<const std::size_t> candidates, std::size_t k) {
    require(k >= 1, ErrorKind::InvalidArgument, "k must be >= 1");
    require(candidates.size() >= k, ErrorKind::InvalidArgument,
            "candidate pool of " + std::to_string(candidates.size()) + " is smaller than k=" + std::to_string(k));
}

} // namespace detail

inline PrototypeSet select_random(std::span<const std::size_t> candidates, std::size_t k, std::uint64_t seed) {
    detail::check_pool(candidates, k);
    auto rng = make_rng(seed, {tag("random")});
    PrototypeSet out{{}, "random", seed, {}};
    for (auto p : sample_positions(candidates.size(), k, rng)) out.indices.push_back(candidates[p]);
    return out;
}

/// Farthest-first traversal from a seeded random start. Each step adds the
/// candidate with the largest distance to its nearest selected prototype
/// (ties to the lowest object index). The trace records that distance per
/// step, starting after the first prototype. At most n*(k-1) evaluations.
inline PrototypeSet select_fft(const DissimilarityProvider& provider, std::span<const std::size_t> candidates,
                               std::size_t k, std::uint64_t seed) {
    detail::check_pool(candidates, k);
    provider.check_indices(candidates);
    auto rng = make_rng(seed, {tag("fft")});
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);

    const std::size_t n = candidates.size();
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<char> chosen(n, 0);
    PrototypeSet out{{}, "fft", seed, {}};

    std::size_t current = pick(rng);
    for (;;) {
        chosen[current] = 1;
        out.indices.push_back(candidates[current]);
        if (out.indices.size() == k) break;
        std::size_t next = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            nearest[i] = std::min(nearest[i], provider.dist_unchecked(candidates[i], candidates[current]));
            if (next == n || nearest[i] > nearest[next] ||
                (nearest[i] == nearest[next] && candidates[i] < candidates[next]))
                next = i;
        }
        out.fitness_trace.push_back(nearest[next]);
        current = next;
    }
    return out;
}

/// K-centres: random distinct initial centers, then alternate nearest-center
/// assignment with replacing each center by its cluster's 1-center (the
/// member minimizing the maximum distance to the other members) until no
/// center moves or `max_iters` updates have run.
///
/// Centers are always assigned to their own cluster, so clusters are never
/// empty. The trace holds the covering radius (max distance of a candidate
/// to its center) after every assignment and is non-increasing.
inline PrototypeSet select_kcentres(const DissimilarityProvider& provider, std::span<const std::size_t> candidates,
                                    std::size_t k, std::uint64_t seed, std::size_t max_iters = 50) {
    detail::check_pool(candidates, k);
    provider.check_indices(candidates);
    auto rng = make_rng(seed, {tag("kcentres")});
    const std::size_t n = candidates.size();

    // Centers are tracked as positions into `candidates`.
    std::vector<std::size_t> centers = sample_positions(n, k, rng);
    std::vector<std::size_t> center_slot(n, k);
    PrototypeSet out{{}, "kcentres", seed, {}};

    for (std::size_t iter = 0;; ++iter) {
        std::fill(center_slot.begin(), center_slot.end(), k);
        for (std::size_t c = 0; c < k; ++c) center_slot[centers[c]] = c;

        std::vector<std::vector<std::size_t>> members(k);
        double radius = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t owner = center_slot[i];
            if (owner == k) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    const double d = provider.dist_unchecked(candidates[i], candidates[centers[c]]);
                    if (d < best) {
                        best = d;
                        owner = c;
                    }
                }
                radius = std::max(radius, best);
            }
            members[owner].push_back(i);
        }
        out.fitness_trace.push_back(radius);
        if (iter == max_iters) break;

        bool moved = false;
        for (std::size_t c = 0; c < k; ++c) {
            const auto& m = members[c];
            auto eccentricity = [&](std::size_t pos) {
                double e = 0.0;
                for (auto o : m) e = std::max(e, provider.dist_unchecked(candidates[pos], candidates[o]));
                return e;
            };
            std::size_t best = centers[c];
            double best_e = eccentricity(best);
            for (auto pos : m) {
                if (pos == centers[c]) continue;
                const double e = eccentricity(pos);
                if (e < best_e || (e == best_e && best != centers[c] && candidates[pos] < candidates[best])) {
                    best_e = e;
                    best = pos;
                }
            }
            if (best != centers[c]) {
                centers[c] = best;
                moved = true;
            }
        }
        if (!moved) break;
    }
    for (auto pos : centers) out.indices.push_back(candidates[pos]);
    return out;
}

/// Greedy forward selection on the supervised matching-label count: each
/// step adds the candidate giving the largest count for the partial set
/// (ties to the lowest object index). The trace holds the count after each step.
inline PrototypeSet select_forward(const FitnessContext& ctx, std::span<const std::size_t> candidates, std::size_t k) {
    detail::check_pool(candidates, k);
    require(ctx.provider != nullptr, ErrorKind::InvalidArgument, "fitness context has no provider");
    require(!ctx.validation.empty(), ErrorKind::InvalidArgument, "validation set is empty");
    const auto& d = *ctx.provider;
    d.check_indices(candidates);

    const std::size_t nv = ctx.validation.size();
    std::vector<double> best_dist(nv, std::numeric_limits<double>::infinity());
    std::vector<int> best_label(nv, -1);
    std::vector<char> taken(candidates.size(), 0);
    PrototypeSet out{{}, "forward", 0, {}};

    for (std::size_t step = 0; step < k; ++step) {
        std::size_t pick = candidates.size();
        std::size_t pick_count = 0;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (taken[c]) continue;
            const std::size_t proto = candidates[c];
            const int proto_label = ctx.labels[proto];
            std::size_t count = 0;
            for (std::size_t a = 0; a < nv; ++a) {
                const auto v = ctx.validation[a];
                const int nearest_label = d.dist_unchecked(v, proto) < best_dist[a] ? proto_label : best_label[a];
                count += nearest_label == ctx.labels[v];
            }
            if (pick == candidates.size() || count > pick_count ||
                (count == pick_count && proto < candidates[pick])) {
                pick = c;
                pick_count = count;
            }
        }
        taken[pick] = 1;
        const std::size_t proto = candidates[pick];
        for (std::size_t a = 0; a < nv; ++a) {
            const double dist = d.dist_unchecked(ctx.validation[a], proto);
            if (dist < best_dist[a]) {
                best_dist[a] = dist;
                best_label[a] = ctx.labels[proto];
            }
        }
        out.indices.push_back(proto);
        out.fitness_trace.push_back(static_cast<double>(pick_count));
    }
    return out;
}

} // namespace protosel
