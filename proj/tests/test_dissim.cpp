#include "protosel/dissim.hpp"

#include <gtest/gtest.h>

#include <random>
#include <thread>

using namespace protosel;

namespace {

std::shared_ptr<const Dataset> points(std::vector<std::vector<double>> rows) {
    Matrix m(rows.size(), rows.front().size());
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
        labels.push_back("x");
    }
    return std::make_shared<const Dataset>(std::move(m), std::move(labels));
}

} // namespace

TEST(Measure, KnownValues) {
    auto ds = points({{0, 0}, {3, 4}, {1, 2}, {4, 0}});
    auto e = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    EXPECT_DOUBLE_EQ(e.dist(0, 1), 5.0);
    auto m1 = DissimilarityProvider::on_demand(ds, Measure::minkowski(1.0));
    EXPECT_DOUBLE_EQ(m1.dist(2, 3), 5.0); // |1-4| + |2-0|
    auto man = DissimilarityProvider::on_demand(ds, Measure::manhattan());
    EXPECT_DOUBLE_EQ(man.dist(2, 3), 5.0);
    auto m3 = DissimilarityProvider::on_demand(ds, Measure::minkowski(3.0));
    EXPECT_NEAR(m3.dist(0, 1), std::cbrt(27.0 + 64.0), 1e-12);
}

TEST(Measure, ParseAndName) {
    EXPECT_EQ(Measure::parse("euclidean").kind, Measure::Kind::Euclidean);
    EXPECT_EQ(Measure::parse("manhattan").kind, Measure::Kind::Manhattan);
    EXPECT_DOUBLE_EQ(Measure::parse("minkowski:3").p, 3.0);
    EXPECT_EQ(Measure::parse("minkowski:1.5").name(), "minkowski:1.5");
    EXPECT_THROW(Measure::parse("cosine"), Error);
    EXPECT_THROW(Measure::parse("minkowski:0.5"), Error);
}

TEST(Provider, DiagonalIsFreeAndZero) {
    auto ds = generate_blobs(2, 10, 3, 1.0, 1);
    auto p = DissimilarityProvider::on_demand(std::make_shared<const Dataset>(ds), Measure::euclidean());
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(p.dist(i, i), 0.0);
    EXPECT_EQ(p.evaluations(), 0u);
    EXPECT_THROW(p.dist(0, ds.size()), Error);
}

TEST(Provider, MeasureAxiomsOnRandomPairs) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(3, 30, 4, 1.0, 9));
    for (auto m : {Measure::euclidean(), Measure::manhattan(), Measure::minkowski(2.5)}) {
        auto p = DissimilarityProvider::on_demand(ds, m);
        for (std::size_t i = 0; i < ds->size(); i += 7)
            for (std::size_t j = 0; j < ds->size(); j += 5) {
                EXPECT_GE(p.dist(i, j), 0.0);
                EXPECT_EQ(p.dist(i, j), p.dist(j, i));
            }
    }
}

TEST(Provider, BlockMatchesEntrywiseAndCountsEvaluations) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(4, 50, 3, 0.8, 4));
    auto p = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, ds->size() - 1);
    std::vector<std::size_t> rows(20), cols(7);
    for (auto& r : rows) r = pick(rng);
    for (auto& c : cols) c = pick(rng);
    std::size_t diagonal = 0;
    for (auto r : rows)
        for (auto c : cols) diagonal += r == c;

    auto before = p.evaluations();
    auto block = p.dist_block(rows, cols);
    EXPECT_EQ(p.evaluations() - before, rows.size() * cols.size() - diagonal);
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) EXPECT_EQ(block(a, b), p.dist(rows[a], cols[b]));

    std::vector<std::size_t> three = {rows[0], rows[1], rows[2]};
    auto sq = p.dist_block(three, three);
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_EQ(sq(a, a), 0.0);
        for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(sq(a, b), sq(b, a));
    }
    std::vector<std::size_t> one = {5};
    EXPECT_EQ(p.dist_block(one, one), Matrix(1, 1, 0.0));
    std::vector<std::size_t> bad = {ds->size()};
    EXPECT_THROW(p.dist_block(bad, one), Error);
}

TEST(Provider, PrecomputedAgreesWithOnDemand) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(3, 40, 6, 1.0, 5));
    auto lazy = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    auto full = precompute(ds, Measure::euclidean());
    EXPECT_EQ(full.source(), DissimilarityProvider::Source::Precomputed);
    EXPECT_EQ(full.revision(), ds->revision());
    for (std::size_t i = 0; i < ds->size(); ++i)
        for (std::size_t j = 0; j < ds->size(); ++j) EXPECT_NEAR(lazy.dist(i, j), full.dist(i, j), 1e-12);
    EXPECT_EQ(full.evaluations(), 0u);
}

TEST(Provider, PrecomputeRefusesOverBudget) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(2, 50, 2, 1.0, 5));
    try {
        precompute(ds, Measure::euclidean(), 100 * 100 * sizeof(double) - 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Resource);
    }
    EXPECT_NO_THROW(precompute(ds, Measure::euclidean(), 100 * 100 * sizeof(double)));
}

TEST(Provider, PrecomputedValidation) {
    Matrix asym(2, 2, 0.0);
    asym(0, 1) = 1.0;
    asym(1, 0) = 1.1;
    EXPECT_THROW(DissimilarityProvider::precomputed(asym), Error);
    Matrix diag(2, 2, 0.0);
    diag(0, 0) = 0.5;
    EXPECT_THROW(DissimilarityProvider::precomputed(diag), Error);
    EXPECT_THROW(DissimilarityProvider::precomputed(Matrix(2, 3)), Error);
}

TEST(Provider, LoadPrecomputedFromBinary) {
    Matrix m(3, 3, 0.0);
    m(0, 1) = m(1, 0) = 1.5;
    m(0, 2) = m(2, 0) = 2.0;
    m(1, 2) = m(2, 1) = 0.25;
    auto path = std::filesystem::temp_directory_path() / "protosel_test_matrix.bin";
    save_binary(Dataset(m, {"a", "b", "c"}), path);
    auto p = load_precomputed(path);
    EXPECT_EQ(p.size(), 3u);
    EXPECT_EQ(p.dist(1, 2), 0.25);

    save_binary(Dataset(Matrix(2, 3), {"a", "b"}), path);
    EXPECT_THROW(load_precomputed(path), Error);
}

TEST(Provider, CacheCountsOnlyMisses) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(2, 20, 3, 1.0, 6));
    auto p = DissimilarityProvider::cached(ds, Measure::euclidean(), 4);
    auto ref = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    EXPECT_EQ(p.dist(1, 2), ref.dist(1, 2));
    EXPECT_EQ(p.dist(2, 1), ref.dist(1, 2));
    EXPECT_EQ(p.evaluations(), 1u);
    EXPECT_EQ(p.cache_hits(), 1u);
    // Fill past capacity: (1,2) is least recently used and evicted.
    for (std::size_t j = 3; j < 7; ++j) p.dist(0, j);
    EXPECT_EQ(p.evaluations(), 5u);
    p.dist(1, 2);
    EXPECT_EQ(p.evaluations(), 6u);
    p.dist(0, 6);
    EXPECT_EQ(p.evaluations(), 6u);
}

TEST(Provider, ConcurrentCallersAgree) {
    auto ds = std::make_shared<const Dataset>(generate_blobs(4, 50, 3, 1.0, 7));
    auto p = DissimilarityProvider::cached(ds, Measure::euclidean(), 64);
    auto ref = DissimilarityProvider::on_demand(ds, Measure::euclidean());
    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t)
        workers.emplace_back([&, t] {
            for (std::size_t i = 0; i < ds->size(); ++i)
                for (std::size_t j = static_cast<std::size_t>(t); j < 40; j += 4)
                    if (p.dist(i, j) != ref.dist(i, j)) ++mismatches;
        });
    for (auto& w : workers) w.join();
    EXPECT_EQ(mismatches.load(), 0);
}
