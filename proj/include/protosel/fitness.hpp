#pragma once

#include "protosel/dissim.hpp"
#include "protosel/error.hpp"
#include "protosel/hashing.hpp"
#include "protosel/matrix.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace protosel {

/// Dense class ids for string labels; ids follow sorted token order.
struct LabelCodes {
    std::vector<int> ids;
    std::vector<std::string> classes;
};

inline LabelCodes intern_labels(std::span<const std::string> labels) {
    std::map<std::string, int> index;
    for (const auto& l : labels) index.emplace(l, 0);
    LabelCodes out;
    for (auto& [label, id] : index) {
        id = static_cast<int>(out.classes.size());
        out.classes.push_back(label);
    }
    out.ids.reserve(labels.size());
    for (const auto& l : labels) out.ids.push_back(index.at(l));
    return out;
}

/// Everything a selection criterion reads. Non-owning: the provider and the
/// optional accelerator must outlive the context.
struct FitnessContext {
    const DissimilarityProvider* provider = nullptr;
    /// The validation set V (provider indices) over which supervised fitness counts.
    std::vector<std::size_t> validation;
    /// Class id of every object in the provider's index space, so both V
    /// members and prototype candidates can be looked up.
    std::vector<int> labels;
    const PivotTable* accelerator = nullptr;

    int label(std::size_t object) const { return labels[object]; }
};

inline FitnessContext make_fitness_context(const DissimilarityProvider& provider, std::vector<std::size_t> validation,
                                           std::span<const std::string> labels_by_index,
                                           const PivotTable* accelerator = nullptr) {
    require(labels_by_index.size() == provider.size(), ErrorKind::InvalidArgument,
            "need one label per provider object");
    provider.check_indices(validation);
    return {&provider, std::move(validation), intern_labels(labels_by_index).ids, accelerator};
}

namespace detail {

inline void check_genes(std::span<const std::size_t> genes, const FitnessContext& ctx, std::size_t min_k) {
    require(ctx.provider != nullptr, ErrorKind::InvalidArgument, "fitness context has no provider");
    require(genes.size() >= min_k, ErrorKind::InvalidArgument,
            "individual has " + std::to_string(genes.size()) + " genes, need at least " + std::to_string(min_k));
    ctx.provider->check_indices(genes);
    for (std::size_t a = 0; a < genes.size(); ++a)
        for (std::size_t b = a + 1; b < genes.size(); ++b)
            require(genes[a] != genes[b], ErrorKind::InvalidArgument,
                    "duplicate gene " + std::to_string(genes[a]) + " in individual");
}

} // namespace detail

/// Total weight of the minimum spanning tree over the complete graph of the
/// prototypes, built with dense Prim. Touches only the k(k-1)/2 prototype
/// pairs, never the validation set.
inline double fitness_mst(std::span<const std::size_t> genes, const FitnessContext& ctx) {
    detail::check_genes(genes, ctx, 2);
    const std::size_t k = genes.size();
    Matrix w(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) w(a, b) = w(b, a) = ctx.provider->dist_unchecked(genes[a], genes[b]);

    std::vector<double> key(k, std::numeric_limits<double>::infinity());
    std::vector<char> in_tree(k, 0);
    key[0] = 0.0;
    double total = 0.0;
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t u = k;
        for (std::size_t v = 0; v < k; ++v)
            if (!in_tree[v] && (u == k || key[v] < key[u])) u = v;
        in_tree[u] = 1;
        total += key[u];
        for (std::size_t v = 0; v < k; ++v)
            if (!in_tree[v] && w(u, v) < key[v]) key[v] = w(u, v);
    }
    return total;
}

/// Number of validation objects whose nearest prototype (by d; ties to the
/// lowest gene position) carries the same label.
inline std::size_t fitness_supervised(std::span<const std::size_t> genes, const FitnessContext& ctx) {
    detail::check_genes(genes, ctx, 1);
    require(!ctx.validation.empty(), ErrorKind::InvalidArgument, "validation set is empty");
    const auto& d = *ctx.provider;
    std::size_t matches = 0;
    for (auto v : ctx.validation) {
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < genes.size(); ++j) {
            const double dist = d.dist_unchecked(v, genes[j]);
            if (dist < best) {
                best = dist;
                nearest = j;
            }
        }
        matches += ctx.labels[v] == ctx.labels[genes[nearest]];
    }
    return matches;
}

/// Same count as fitness_supervised, but the nearest prototype is searched
/// in the pivot-code space of the context's accelerator.
inline std::size_t fitness_supervised_lsh(std::span<const std::size_t> genes, const FitnessContext& ctx) {
    detail::check_genes(genes, ctx, 1);
    require(!ctx.validation.empty(), ErrorKind::InvalidArgument, "validation set is empty");
    require(ctx.accelerator != nullptr, ErrorKind::InvalidArgument, "fitness context has no pivot table");
    const auto& table = *ctx.accelerator;
    check_revision(*ctx.provider, table);

    Matrix proto_codes(genes.size(), table.pivots());
    for (std::size_t j = 0; j < genes.size(); ++j) {
        const auto c = table.code(genes[j]);
        std::copy(c.begin(), c.end(), proto_codes.row(j).begin());
    }
    std::size_t matches = 0;
    for (auto v : ctx.validation) {
        const auto nearest = detail::nearest_row(table.code(v), proto_codes);
        matches += ctx.labels[v] == ctx.labels[genes[nearest]];
    }
    return matches;
}

enum class FitnessKind { Mst, Supervised, SupervisedLsh };

inline std::string to_string(FitnessKind kind) {
    switch (kind) {
    case FitnessKind::Mst: return "mst";
    case FitnessKind::Supervised: return "supervised";
    case FitnessKind::SupervisedLsh: return "supervised_lsh";
    }
    return "?";
}

inline double evaluate_fitness(FitnessKind kind, std::span<const std::size_t> genes, const FitnessContext& ctx) {
    switch (kind) {
    case FitnessKind::Mst: return fitness_mst(genes, ctx);
    case FitnessKind::Supervised: return static_cast<double>(fitness_supervised(genes, ctx));
    case FitnessKind::SupervisedLsh: return static_cast<double>(fitness_supervised_lsh(genes, ctx));
    }
    return 0.0;
}

} // namespace protosel
