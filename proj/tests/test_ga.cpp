#include "protosel/baselines.hpp"
#include "protosel/ga.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <set>

using namespace protosel;

namespace {

std::vector<std::size_t> iota_n(std::size_t n, std::size_t from = 0) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), from);
    return v;
}

struct Fixture {
    std::shared_ptr<const Dataset> data;
    DissimilarityProvider provider;
    FitnessContext ctx;
    std::vector<std::size_t> candidates;

    Fixture(std::size_t classes, std::size_t per_class, std::size_t q, double spread, std::uint64_t seed)
        : data(std::make_shared<const Dataset>(generate_blobs(classes, per_class, q, spread, seed))),
          provider(DissimilarityProvider::on_demand(data, Measure::euclidean())) {
        // Even objects validate, odd objects are candidates.
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < data->size(); ++i) (i % 2 ? candidates : v).push_back(i);
        ctx = make_fitness_context(provider, v, data->labels());
    }
};

bool distinct(const std::vector<std::size_t>& g) { return std::set<std::size_t>(g.begin(), g.end()).size() == g.size(); }

} // namespace

TEST(Clustering, SingletonAndSingleCluster) {
    Fixture f(2, 10, 2, 1.0, 1);
    auto all = cluster_candidates(f.provider, f.candidates, f.candidates.size(), 3);
    for (const auto& m : all.members) EXPECT_EQ(m.size(), 1u);
    auto one = cluster_candidates(f.provider, f.candidates, 1, 3);
    ASSERT_EQ(one.clusters(), 1u);
    EXPECT_EQ(one.members[0].size(), f.candidates.size());
}

TEST(Clustering, EveryCandidateGoesToItsNearestCenter) {
    Fixture f(4, 50, 3, 1.0, 2);
    auto c = cluster_candidates(f.provider, f.candidates, 7, 9);
    std::size_t total = 0;
    for (std::size_t i = 0; i < f.candidates.size(); ++i) {
        const auto o = f.candidates[i];
        const auto own = c.membership[i];
        EXPECT_EQ(c.cluster_of(o), static_cast<int>(own));
        for (std::size_t j = 0; j < c.clusters(); ++j)
            EXPECT_LE(f.provider.dist(o, c.centers[own]), f.provider.dist(o, c.centers[j]));
    }
    for (const auto& m : c.members) {
        EXPECT_FALSE(m.empty());
        EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
        total += m.size();
    }
    EXPECT_EQ(total, f.candidates.size());
}

TEST(Clustering, CostIsOnePassOverCandidates) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(10, 100, 4, 1.0, 5));
    auto p = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    auto cands = iota_n(1000);
    cluster_candidates(p, cands, 10, 1);
    EXPECT_LE(p.evaluations(), 10000u);
}

TEST(Clustering, IdenticalObjectsCannotFormSeveralClusters) {
    auto ds = std::make_shared<const Dataset>(Matrix(6, 2, 1.0), std::vector<std::string>(6, "a"));
    auto p = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    auto cands = iota_n(6);
    try {
        cluster_candidates(p, cands, 2, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }
    EXPECT_THROW(cluster_candidates(p, cands, 7, 1), Error);
}

TEST(GenePool, RepairMakesGenesDistinctAndCountsFallbacks) {
    std::vector<std::size_t> cands = {5, 6, 7, 8};
    ClusterAssignment c;
    c.centers = {5, 7};
    c.members = {{5, 6}, {7, 8}};
    GenePool pool(cands, &c);
    Rng rng(1);
    std::vector<std::size_t> genes = {5, 5};
    pool.repair(genes, rng);
    EXPECT_EQ(genes[0], 5u);
    EXPECT_TRUE(genes[1] == 7u || genes[1] == 8u);
    EXPECT_EQ(pool.constraint_fallbacks(), 0u);

    // Position 1 only allows 7 and both 7 and 8 are taken: leaves the cluster.
    ClusterAssignment tight;
    tight.centers = {5, 7};
    tight.members = {{5, 6, 8}, {7}};
    GenePool small(cands, &tight);
    std::vector<std::size_t> g3 = {7, 7};
    small.repair(g3, rng);
    EXPECT_EQ(g3[1], 5u);
    EXPECT_EQ(small.constraint_fallbacks(), 1u);

    std::vector<std::size_t> dup = {1, 1};
    EXPECT_THROW(GenePool(dup, nullptr), Error);
    std::vector<std::size_t> single = {4};
    GenePool one(single);
    std::vector<std::size_t> clash = {4, 4};
    EXPECT_THROW(one.repair(clash, rng), Error);
}

TEST(Population, InitialIndividualsAreDistinctAndInPool) {
    Fixture f(3, 40, 2, 1.0, 3);
    GenePool pool(f.candidates);
    Rng rng(4);
    auto pop = init_population(pool, 10, 20, rng);
    ASSERT_EQ(pop.size(), 20u);
    std::set<std::size_t> allowed(f.candidates.begin(), f.candidates.end());
    for (const auto& ind : pop) {
        EXPECT_EQ(ind.genes.size(), 10u);
        EXPECT_TRUE(distinct(ind.genes));
        EXPECT_FALSE(ind.fitness.has_value());
        for (auto g : ind.genes) EXPECT_TRUE(allowed.count(g));
    }
    Rng again(4);
    auto pop2 = init_population(pool, 10, 20, again);
    for (std::size_t i = 0; i < pop.size(); ++i) EXPECT_EQ(pop[i].genes, pop2[i].genes);
    Rng r1(5);
    EXPECT_EQ(init_population(pool, 10, 1, r1).size(), 1u);
    EXPECT_THROW(init_population(pool, f.candidates.size() + 1, 2, r1), Error);
}

TEST(Population, ClusteredGenesStayInTheirCluster) {
    Fixture f(5, 60, 3, 1.0, 6);
    auto c = cluster_candidates(f.provider, f.candidates, 8, 2);
    GenePool pool(f.candidates, &c);
    Rng rng(8);
    for (const auto& ind : init_population(pool, 8, 50, rng))
        for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(c.cluster_of(ind.genes[j]), static_cast<int>(j));
    EXPECT_THROW(init_population(pool, 7, 2, rng), Error);
}

TEST(Reproduce, ExtremeProbabilities) {
    auto cands = iota_n(100);
    GenePool pool(cands);
    Rng rng(1);
    Individual best{{0, 1, 2, 3, 4}, 9.0}, current{{10, 11, 12, 13, 14}, 3.0};
    auto none = reproduce(best, current, 0.0, pool, rng);
    EXPECT_EQ(none.genes, current.genes);
    EXPECT_EQ(none.fitness, current.fitness);
    auto all = reproduce(best, current, 1.0, pool, rng);
    EXPECT_EQ(all.genes, best.genes);
    EXPECT_FALSE(all.fitness.has_value());
}

TEST(Reproduce, TakesEachGeneFromBestWithProbabilityRp) {
    auto cands = iota_n(100);
    GenePool pool(cands);
    Rng rng(12);
    Individual best{iota_n(10), std::nullopt}, current{iota_n(10, 50), std::nullopt};
    std::size_t from_best = 0;
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t) {
        auto child = reproduce(best, current, 0.5, pool, rng);
        for (std::size_t j = 0; j < 10; ++j) from_best += child.genes[j] == best.genes[j];
    }
    EXPECT_NEAR(static_cast<double>(from_best) / (10.0 * trials), 0.5, 0.02);
}

TEST(Mutate, ZeroProbabilityKeepsIndividual) {
    auto cands = iota_n(50);
    GenePool pool(cands);
    Rng rng(2);
    Individual ind{{3, 9, 27}, 4.0};
    auto out = mutate(ind, 0.0, pool, rng);
    EXPECT_EQ(out.genes, ind.genes);
    EXPECT_EQ(out.fitness, ind.fitness);
}

TEST(Mutate, CertainMutationRedrawsUniformly) {
    auto cands = iota_n(10);
    GenePool pool(cands);
    Rng rng(3);
    std::map<std::size_t, int> counts;
    Individual ind{{0}, std::nullopt};
    for (int t = 0; t < 10000; ++t) ++counts[mutate(ind, 1.0, pool, rng).genes[0]];
    ASSERT_EQ(counts.size(), 10u);
    for (auto [value, n] : counts) EXPECT_NEAR(n, 1000, 150) << value;
}

TEST(Mutate, ExpectedChangedGenesIsKTimesMp) {
    auto cands = iota_n(10000);
    GenePool pool(cands);
    Rng rng(4);
    Individual ind{iota_n(20), std::nullopt};
    std::size_t changed = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        auto out = mutate(ind, 0.02, pool, rng);
        for (std::size_t j = 0; j < 20; ++j) changed += out.genes[j] != ind.genes[j];
    }
    EXPECT_NEAR(static_cast<double>(changed) / trials, 0.4, 0.05);
}

TEST(RunGa, SingleIndividualSingleGeneration) {
    Fixture f(3, 30, 2, 1.0, 7);
    GaParams p;
    p.prototypes = 4;
    p.population_size = 1;
    p.generations = 1;
    p.seed = 11;
    std::vector<Individual> initial;
    auto res = run_ga(f.ctx, FitnessKind::Supervised, p, f.candidates, [&](std::size_t g, auto pop) {
        if (g == 0) initial.assign(pop.begin(), pop.end());
    });
    ASSERT_EQ(initial.size(), 1u);
    EXPECT_EQ(res.indices, initial[0].genes);
    ASSERT_EQ(res.fitness_trace.size(), 1u);
    EXPECT_DOUBLE_EQ(res.fitness_trace[0], *initial[0].fitness);
    EXPECT_EQ(res.method, "ga-sup");
}

TEST(RunGa, TraceIsMonotoneAndEliteSurvives) {
    Fixture f(5, 40, 3, 1.5, 8);
    GaParams p;
    p.prototypes = 6;
    p.generations = 25;
    p.mutation_prob = 0.2;
    p.seed = 5;
    double running = -1.0;
    std::size_t calls = 0;
    auto res = run_ga(f.ctx, FitnessKind::Mst, p, f.candidates, [&](std::size_t g, auto pop) {
        EXPECT_EQ(g, calls++);
        EXPECT_EQ(pop.size(), p.population_size);
        double top = -1.0;
        for (const auto& ind : pop) {
            ASSERT_TRUE(ind.fitness.has_value());
            EXPECT_TRUE(distinct(ind.genes));
            EXPECT_DOUBLE_EQ(*ind.fitness, fitness_mst(ind.genes, f.ctx));
            top = std::max(top, *ind.fitness);
        }
        EXPECT_GE(top, running);
        running = std::max(running, top);
    });
    EXPECT_EQ(calls, p.generations + 1);
    ASSERT_EQ(res.fitness_trace.size(), p.generations);
    for (std::size_t g = 1; g < res.fitness_trace.size(); ++g) EXPECT_GE(res.fitness_trace[g], res.fitness_trace[g - 1]);
    EXPECT_DOUBLE_EQ(res.fitness_trace.back(), running);
    EXPECT_DOUBLE_EQ(fitness_mst(res.indices, f.ctx), running);
}

TEST(RunGa, DeterministicForSeed) {
    Fixture f(4, 30, 2, 1.0, 9);
    GaParams p;
    p.prototypes = 5;
    p.seed = 77;
    p.use_clustering = true;
    auto a = run_ga(f.ctx, FitnessKind::Supervised, p, f.candidates);
    auto b = run_ga(f.ctx, FitnessKind::Supervised, p, f.candidates);
    EXPECT_EQ(a.indices, b.indices);
    EXPECT_EQ(a.fitness_trace, b.fitness_trace);
    EXPECT_EQ(a.method, "ga-sup-clust");
}

TEST(RunGa, ClusteredResultTakesOneGenePerCluster) {
    Fixture f(6, 40, 3, 1.0, 10);
    GaParams p;
    p.prototypes = 6;
    p.use_clustering = true;
    p.seed = 3;
    auto res = run_ga(f.ctx, FitnessKind::Mst, p, f.candidates);
    auto c = cluster_candidates(f.provider, f.candidates, 6, p.seed);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(c.cluster_of(res.indices[j]), static_cast<int>(j));
}

TEST(RunGa, MstCostDoesNotGrowWithPool) {
    for (std::size_t per_class : {50, 2000}) {
        Fixture f(2, per_class, 3, 1.0, 11);
        GaParams p;
        p.prototypes = 10;
        p.seed = 1;
        run_ga(f.ctx, FitnessKind::Mst, p, f.candidates);
        const std::size_t k = p.prototypes;
        EXPECT_LE(f.provider.evaluations(), p.population_size * (p.generations + 1) * k * (k - 1) / 2);
    }
}

TEST(RunGa, SupervisedBeatsRandomIndividualsOnAverage) {
    Fixture f(10, 300, 5, 0.6, 1);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GaParams p;
        p.seed = seed;
        const double ga = run_ga(f.ctx, FitnessKind::Supervised, p, f.candidates).fitness_trace.back();
        double random_mean = 0.0;
        for (int r = 0; r < 20; ++r) {
            auto rnd = select_random(f.candidates, 10, derive_seed(seed, {static_cast<std::uint64_t>(r)}));
            random_mean += static_cast<double>(oracle::supervised_count(
                               f.ctx.validation, rnd.indices, f.data->labels(),
                               [&](auto a, auto b) { return f.provider.dist(a, b); })) /
                           20.0;
        }
        EXPECT_GE(ga, random_mean) << seed;
    }
}

TEST(RunGa, RejectsBadParameters) {
    Fixture f(2, 10, 2, 1.0, 13);
    GaParams p;
    p.prototypes = f.candidates.size() + 1;
    EXPECT_THROW(run_ga(f.ctx, FitnessKind::Mst, p, f.candidates), Error);
    p.prototypes = 3;
    p.mutation_prob = 1.5;
    EXPECT_THROW(run_ga(f.ctx, FitnessKind::Mst, p, f.candidates), Error);
    p.mutation_prob = 0.02;
    p.generations = 0;
    EXPECT_THROW(run_ga(f.ctx, FitnessKind::Mst, p, f.candidates), Error);
}
