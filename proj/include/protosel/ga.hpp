#pragma once

#include "protosel/dissim.hpp"
#include "protosel/dspace.hpp"
#include "protosel/error.hpp"
#include "protosel/fitness.hpp"
#include "protosel/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace protosel {

/// One chromosome: k candidate indices, one per gene position.
struct Individual {
    std::vector<std::size_t> genes;
    std::optional<double> fitness;
};

struct GaParams {
    /// k, the number of prototypes per individual.
    std::size_t prototypes = 10;
    std::size_t population_size = 20;
    double reproduction_prob = 0.5;
    double mutation_prob = 0.02;
    std::size_t generations = 20;
    bool use_clustering = false;
    std::uint64_t seed = 0;

    void validate() const {
        require(prototypes >= 1, ErrorKind::InvalidArgument, "k must be >= 1");
        require(population_size >= 1, ErrorKind::InvalidArgument, "population size must be >= 1");
        require(generations >= 1, ErrorKind::InvalidArgument, "generations must be >= 1");
        require(reproduction_prob >= 0.0 && reproduction_prob <= 1.0, ErrorKind::InvalidArgument,
                "reproduction probability must be in [0,1]");
        require(mutation_prob >= 0.0 && mutation_prob <= 1.0, ErrorKind::InvalidArgument,
                "mutation probability must be in [0,1]");
    }
};

/// Candidates grouped by one nearest-center assignment pass.
struct ClusterAssignment {
    std::vector<std::size_t> centers;
    /// Cluster id of candidates[i], aligned with the candidate list.
    std::vector<std::size_t> membership;
    /// Object indices of each cluster, ascending.
    std::vector<std::vector<std::size_t>> members;
    /// Provider index -> cluster id, -1 for non-candidates.
    std::vector<std::int32_t> cluster_by_object;

    std::size_t clusters() const noexcept { return centers.size(); }

    int cluster_of(std::size_t object) const noexcept {
        return object < cluster_by_object.size() ? cluster_by_object[object] : -1;
    }
};

/// k distinct positions in [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_positions(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pos[i], pos[pick(rng)]);
    }
    pos.resize(k);
    return pos;
}

/// Assigns each candidate to its nearest of k randomly drawn centers (ties
/// to the lowest center position). Single pass, no recentering. If a cluster
/// comes out empty (possible with duplicate objects) the centers are redrawn,
/// at most `max_redraws` times.
inline ClusterAssignment cluster_candidates(const DissimilarityProvider& provider,
                                            std::span<const std::size_t> candidates, std::size_t k,
                                            std::uint64_t seed, int max_redraws = 16) {
    require(k >= 1, ErrorKind::InvalidArgument, "k must be >= 1");
    require(candidates.size() >= k, ErrorKind::InvalidArgument,
            "candidate pool of " + std::to_string(candidates.size()) + " is smaller than k=" + std::to_string(k));
    provider.check_indices(candidates);
    auto rng = make_rng(seed, {tag("cluster")});

    for (int attempt = 0; attempt <= max_redraws; ++attempt) {
        ClusterAssignment out;
        for (auto p : sample_positions(candidates.size(), k, rng)) out.centers.push_back(candidates[p]);

        out.membership.resize(candidates.size());
        out.members.assign(k, {});
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            std::size_t nearest = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = provider.dist_unchecked(candidates[i], out.centers[c]);
                if (d < best) {
                    best = d;
                    nearest = c;
                }
            }
            out.membership[i] = nearest;
            out.members[nearest].push_back(candidates[i]);
        }
        if (std::any_of(out.members.begin(), out.members.end(), [](const auto& m) { return m.empty(); })) continue;

        std::size_t max_index = *std::max_element(candidates.begin(), candidates.end());
        out.cluster_by_object.assign(max_index + 1, -1);
        for (std::size_t i = 0; i < candidates.size(); ++i)
            out.cluster_by_object[candidates[i]] = static_cast<std::int32_t>(out.membership[i]);
        for (auto& m : out.members) std::sort(m.begin(), m.end());
        return out;
    }
    fail(ErrorKind::Degenerate, "could not form " + std::to_string(k) + " nonempty clusters after " +
                                    std::to_string(max_redraws) + " redraws");
}

/// Where gene values may come from: the whole candidate pool, or, when
/// clustered, only cluster j for gene j.
class GenePool {
public:
    GenePool(std::span<const std::size_t> candidates, const ClusterAssignment* clusters = nullptr)
        : candidates_(candidates.begin(), candidates.end()), clusters_(clusters) {
        require(!candidates_.empty(), ErrorKind::InvalidArgument, "empty candidate pool");
        std::unordered_set<std::size_t> seen;
        for (auto c : candidates_)
            require(seen.insert(c).second, ErrorKind::InvalidArgument,
                    "duplicate candidate " + std::to_string(c) + " in pool");
        sorted_ = candidates_;
        std::sort(sorted_.begin(), sorted_.end());
    }

    const ClusterAssignment* clusters() const noexcept { return clusters_; }
    std::size_t size() const noexcept { return candidates_.size(); }

    std::span<const std::size_t> allowed(std::size_t position) const {
        if (clusters_) return clusters_->members[position];
        return sorted_;
    }

    std::size_t draw(std::size_t position, Rng& rng) const {
        const auto options = allowed(position);
        std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
        return options[pick(rng)];
    }

    /// Number of times repair had to leave a gene's cluster.
    std::size_t constraint_fallbacks() const noexcept { return fallbacks_; }

    /// Makes genes distinct. A duplicated gene is redrawn from its allowed
    /// set (bounded attempts), then replaced by the lowest unused allowed
    /// index, then by the lowest unused candidate overall.
    void repair(std::vector<std::size_t>& genes, Rng& rng) const {
        auto used_elsewhere = [&](std::size_t value, std::size_t position) {
            for (std::size_t o = 0; o < genes.size(); ++o)
                if (o != position && genes[o] == value) return true;
            return false;
        };
        for (std::size_t j = 1; j < genes.size(); ++j) {
            bool duplicate = false;
            for (std::size_t o = 0; o < j && !duplicate; ++o) duplicate = genes[o] == genes[j];
            if (!duplicate) continue;
            bool fixed = false;
            for (int attempt = 0; attempt < 32 && !fixed; ++attempt) {
                const auto value = draw(j, rng);
                if (!used_elsewhere(value, j)) {
                    genes[j] = value;
                    fixed = true;
                }
            }
            for (auto value : allowed(j)) {
                if (fixed) break;
                if (!used_elsewhere(value, j)) {
                    genes[j] = value;
                    fixed = true;
                }
            }
            for (auto value : sorted_) {
                if (fixed) break;
                if (!used_elsewhere(value, j)) {
                    genes[j] = value;
                    fixed = true;
                    ++fallbacks_;
                }
            }
            require(fixed, ErrorKind::InvalidArgument, "candidate pool too small for distinct genes");
        }
    }

private:
    std::vector<std::size_t> candidates_;
    std::vector<std::size_t> sorted_;
    const ClusterAssignment* clusters_;
    mutable std::size_t fallbacks_ = 0;
};

inline std::vector<Individual> init_population(const GenePool& pool, std::size_t k, std::size_t size, Rng& rng) {
    require(k >= 1 && pool.size() >= k, ErrorKind::InvalidArgument,
            "candidate pool of " + std::to_string(pool.size()) + " is smaller than k=" + std::to_string(k));
    require(!pool.clusters() || pool.clusters()->clusters() == k, ErrorKind::InvalidArgument,
            "cluster count does not match k");
    std::vector<Individual> population(size);
    for (auto& ind : population) {
        ind.genes.resize(k);
        for (std::size_t j = 0; j < k; ++j) ind.genes[j] = pool.draw(j, rng);
        pool.repair(ind.genes, rng);
    }
    return population;
}

/// Uniform crossover with the best individual: each gene is taken from
/// `best` with probability rp.
inline Individual reproduce(const Individual& best, const Individual& current, double rp, const GenePool& pool,
                            Rng& rng) {
    require(best.genes.size() == current.genes.size(), ErrorKind::InvalidArgument, "gene count mismatch");
    Individual child{current.genes, std::nullopt};
    std::bernoulli_distribution take(rp);
    for (std::size_t j = 0; j < child.genes.size(); ++j)
        if (take(rng)) child.genes[j] = best.genes[j];
    pool.repair(child.genes, rng);
    if (child.genes == current.genes) child.fitness = current.fitness;
    return child;
}

/// Each gene is independently redrawn from its allowed set with probability mp.
inline Individual mutate(const Individual& ind, double mp, const GenePool& pool, Rng& rng) {
    Individual out{ind.genes, std::nullopt};
    std::bernoulli_distribution flip(mp);
    for (std::size_t j = 0; j < out.genes.size(); ++j)
        if (flip(rng)) out.genes[j] = pool.draw(j, rng);
    pool.repair(out.genes, rng);
    if (out.genes == ind.genes) out.fitness = ind.fitness;
    return out;
}

/// Called with the generation number (0 = initial population) and the
/// evaluated population.
using GaObserver = std::function<void(std::size_t, std::span<const Individual>)>;

inline std::string ga_method_name(FitnessKind kind, bool clustered) {
    std::string name = "ga-";
    switch (kind) {
    case FitnessKind::Mst: name += "mst"; break;
    case FitnessKind::Supervised: name += "sup"; break;
    case FitnessKind::SupervisedLsh: name += "sup-lsh"; break;
    }
    return clustered ? name + "-clust" : name;
}

/// Elitist generational GA over index-vector individuals. The best individual
/// is the only parent, is never mutated, and is updated once per generation
/// after all offspring are evaluated. Runs exactly `generations` generations
/// after the initial population; the trace has one best-fitness entry per
/// generation.
inline PrototypeSet run_ga(const FitnessContext& ctx, FitnessKind kind, const GaParams& params,
                           std::span<const std::size_t> candidates, const GaObserver& observer = {}) {
    params.validate();
    require(ctx.provider != nullptr, ErrorKind::InvalidArgument, "fitness context has no provider");
    require(!candidates.empty(), ErrorKind::InvalidArgument, "empty candidate pool");
    const std::size_t k = params.prototypes;
    require(candidates.size() >= k, ErrorKind::InvalidArgument,
            "candidate pool of " + std::to_string(candidates.size()) + " is smaller than k=" + std::to_string(k));

    std::optional<ClusterAssignment> clusters;
    if (params.use_clustering) clusters = cluster_candidates(*ctx.provider, candidates, k, params.seed);
    const GenePool pool(candidates, clusters ? &*clusters : nullptr);

    auto evaluate = [&](std::vector<Individual>& population) {
        for (auto& ind : population)
            if (!ind.fitness) ind.fitness = evaluate_fitness(kind, ind.genes, ctx);
    };
    auto fittest = [](const std::vector<Individual>& population) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < population.size(); ++i)
            if (*population[i].fitness > *population[best].fitness) best = i;
        return best;
    };

    auto init_rng = make_rng(params.seed, {tag("init")});
    auto population = init_population(pool, k, params.population_size, init_rng);
    evaluate(population);
    std::size_t elite = fittest(population);
    Individual best = population[elite];
    if (observer) observer(0, population);

    PrototypeSet result;
    result.method = ga_method_name(kind, params.use_clustering);
    result.seed = params.seed;
    result.fitness_trace.reserve(params.generations);

    for (std::size_t g = 1; g <= params.generations; ++g) {
        auto rng = make_rng(params.seed, {tag("generation"), g});
        for (std::size_t i = 0; i < population.size(); ++i) {
            if (i == elite) continue;
            auto child = reproduce(best, population[i], params.reproduction_prob, pool, rng);
            population[i] = mutate(child, params.mutation_prob, pool, rng);
        }
        evaluate(population);
        const std::size_t top = fittest(population);
        if (*population[top].fitness > *best.fitness) {
            elite = top;
            best = population[top];
        }
        result.fitness_trace.push_back(*best.fitness);
        if (observer) observer(g, population);
    }
    result.indices = best.genes;
    return result;
}

} // namespace protosel
