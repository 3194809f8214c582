#pragma once

#include "protosel/baselines.hpp"
#include "protosel/dataset.hpp"
#include "protosel/dissim.hpp"
#include "protosel/dspace.hpp"
#include "protosel/error.hpp"
#include "protosel/fitness.hpp"
#include "protosel/ga.hpp"
#include "protosel/hashing.hpp"
#include "protosel/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace protosel {

inline constexpr const char* kVersion = "0.1.0";

struct BlobSpec {
    std::size_t classes = 10;
    std::size_t per_class = 300;
    std::size_t dimension = 5;
    double spread = 0.6;
    std::uint64_t seed = 1;
};

/// A dataset file, or synthetic blobs when `path` is empty.
struct DataSource {
    std::filesystem::path path;
    std::string label_column = "label";
    BlobSpec blobs;

    Dataset load() const {
        if (path.empty()) return generate_blobs(blobs.classes, blobs.per_class, blobs.dimension, blobs.spread, blobs.seed);
        return load_dataset(path, label_column);
    }
};

/// Tunables shared by every selector in a run.
struct SelectorOptions {
    std::size_t population_size = 20;
    double reproduction_prob = 0.5;
    double mutation_prob = 0.02;
    std::size_t generations = 20;
    std::size_t pivots = 64;
    std::size_t pivot_rounds = 16;
    std::size_t kcentres_iters = 50;
};

inline const std::vector<std::string>& known_selectors() {
    static const std::vector<std::string> names = {"random",     "fft",          "kcentres",  "forward",
                                                   "ga-mst",     "ga-mst-clust", "ga-sup",    "ga-sup-clust",
                                                   "ga-sup-lsh", "ga-sup-lsh-clust"};
    return names;
}

/// Runs one named selector with candidates drawn from `candidates`. LSH
/// variants train a pivot table on the candidate pool and encode the
/// validation set and pool before the GA starts.
inline PrototypeSet run_selector(const std::string& name, const FitnessContext& ctx,
                                 std::span<const std::size_t> candidates, std::size_t k, std::uint64_t seed,
                                 const SelectorOptions& opt = {}) {
    require(ctx.provider != nullptr, ErrorKind::InvalidArgument, "fitness context has no provider");
    const auto& provider = *ctx.provider;
    if (name == "random") return select_random(candidates, k, seed);
    if (name == "fft") return select_fft(provider, candidates, k, seed);
    if (name == "kcentres") return select_kcentres(provider, candidates, k, seed, opt.kcentres_iters);
    if (name == "forward") {
        auto out = select_forward(ctx, candidates, k);
        out.seed = seed;
        return out;
    }
    if (name.rfind("ga-", 0) != 0) fail(ErrorKind::InvalidArgument, "unknown selector '" + name + "'");

    GaParams params;
    params.prototypes = k;
    params.population_size = opt.population_size;
    params.reproduction_prob = opt.reproduction_prob;
    params.mutation_prob = opt.mutation_prob;
    params.generations = opt.generations;
    params.seed = seed;
    std::string base = name;
    if (base.size() > 6 && base.ends_with("-clust")) {
        params.use_clustering = true;
        base.resize(base.size() - 6);
    }
    if (base == "ga-mst") return run_ga(ctx, FitnessKind::Mst, params, candidates);
    if (base == "ga-sup") return run_ga(ctx, FitnessKind::Supervised, params, candidates);
    if (base == "ga-sup-lsh") {
        auto table = train_pivots(provider, candidates, opt.pivots, derive_seed(seed, {tag("pivots")}),
                                  opt.pivot_rounds);
        attach_codes(provider, table, ctx.validation);
        attach_codes(provider, table, candidates);
        FitnessContext accelerated = ctx;
        accelerated.accelerator = &table;
        return run_ga(accelerated, FitnessKind::SupervisedLsh, params, candidates);
    }
    fail(ErrorKind::InvalidArgument, "unknown selector '" + name + "'");
}

struct ExperimentConfig {
    DataSource data;
    std::string measure = "euclidean";
    SplitSpec split{0.6, 0.2, 0.2, 0};
    /// Train the classifiers on the validation set instead of a disjoint split.
    bool overlap = false;
    std::vector<std::string> selectors = {"random", "ga-sup"};
    std::vector<std::size_t> ks = {10, 20, 30, 40};
    std::size_t repetitions = 10;
    std::vector<std::string> classifiers = {"1nn"};
    std::optional<double> ldc_reg;
    SelectorOptions options;
    std::uint64_t seed = 0;

    void validate() const {
        require(!selectors.empty(), ErrorKind::InvalidArgument, "at least one selector is required");
        require(!ks.empty(), ErrorKind::InvalidArgument, "at least one k is required");
        require(!classifiers.empty(), ErrorKind::InvalidArgument, "at least one classifier is required");
        require(repetitions >= 1, ErrorKind::InvalidArgument, "repetitions must be >= 1");
        for (const auto& s : selectors)
            require(std::find(known_selectors().begin(), known_selectors().end(), s) != known_selectors().end(),
                    ErrorKind::InvalidArgument, "unknown selector '" + s + "'");
        for (const auto& c : classifiers)
            require(c == "1nn" || c == "ldc", ErrorKind::InvalidArgument, "unknown classifier '" + c + "'");
        for (auto k : ks) require(k >= 1, ErrorKind::InvalidArgument, "k must be >= 1");
        require(split.test_fraction > 0.0, ErrorKind::InvalidArgument, "test fraction must be positive");
        require(overlap || split.train_fraction > 0.0, ErrorKind::InvalidArgument,
                "train fraction must be positive unless classifiers train on the validation set");
        Measure::parse(measure);
    }
};

struct RunRecord {
    std::string selector;
    std::size_t k = 0;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    /// "ok", or the failure message.
    std::string status = "ok";
    std::vector<std::size_t> selected;
    std::vector<double> fitness_trace;
    double selection_seconds = 0.0;
    double embedding_seconds = 0.0;
    double classification_seconds = 0.0;
    /// Classifier name -> error rate.
    std::map<std::string, double> errors;
    std::uint64_t evaluations = 0;

    bool ok() const noexcept { return status == "ok"; }
};

namespace detail {

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <class T> std::string join(const std::vector<T>& values, char sep = ' ') {
    std::ostringstream os;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << sep;
        if constexpr (std::is_floating_point_v<T>)
            os << format_double(values[i]);
        else
            os << values[i];
    }
    return os.str();
}

inline std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", s);
    return buf;
}

} // namespace detail

/// Runs every (repetition, selector, k) combination and hands each record to
/// `sink` as soon as it is complete. Per-repetition splits and per-run
/// selector seeds derive from the master seed, so results are reproducible.
/// A failing selector or classifier is recorded in the record's status.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg,
                                             const std::function<void(const RunRecord&)>& sink = {}) {
    cfg.validate();
    const auto data = std::make_shared<const Dataset>(cfg.data.load());
    const auto measure = Measure::parse(cfg.measure);
    std::vector<RunRecord> records;

    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        SplitSpec spec = cfg.split;
        spec.seed = derive_seed(cfg.seed, {tag("split"), rep});
        const auto parts = split_indices(*data, spec);
        const auto& train_idx = cfg.overlap ? parts.validation : parts.train;

        const auto provider = DissimilarityProvider::on_demand(data, measure);
        const auto ctx = make_fitness_context(provider, parts.validation, data->labels());
        std::vector<std::string> train_labels, test_labels;
        for (auto i : train_idx) train_labels.push_back(data->label(i));
        for (auto i : parts.test) test_labels.push_back(data->label(i));

        for (const auto& selector : cfg.selectors) {
            for (auto k : cfg.ks) {
                RunRecord rec;
                rec.selector = selector;
                rec.k = k;
                rec.repetition = rep;
                rec.seed = derive_seed(cfg.seed, {tag("select"), rep, tag(selector.c_str()), k});
                try {
                    const auto evals_before = provider.evaluations();
                    detail::Stopwatch watch;
                    auto protos = run_selector(selector, ctx, parts.validation, k, rec.seed, cfg.options);
                    rec.selection_seconds = watch.lap();
                    rec.evaluations = provider.evaluations() - evals_before;
                    rec.selected = protos.indices;
                    rec.fitness_trace = protos.fitness_trace;

                    watch.lap();
                    const auto train = embed(provider, train_idx, protos);
                    const auto test = embed(provider, parts.test, protos);
                    rec.embedding_seconds = watch.lap();

                    for (const auto& c : cfg.classifiers) {
                        const auto predicted = c == "ldc" ? classify_ldc(train, train_labels, test, cfg.ldc_reg)
                                                          : classify_1nn(train, train_labels, test);
                        rec.errors[c] = error_rate(predicted, test_labels);
                    }
                    rec.classification_seconds = watch.lap();
                } catch (const Error& e) {
                    rec.status = std::string(to_string(e.kind())) + ": " + e.what();
                }
                if (sink) sink(rec);
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

/// Streams records to a CSV file, flushing after every row.
class RecordWriter {
public:
    RecordWriter(const std::filesystem::path& path, std::vector<std::string> classifiers)
        : out_(path), classifiers_(std::move(classifiers)) {
        require(static_cast<bool>(out_), ErrorKind::Io, "cannot write " + path.string());
        out_ << "selector,k,repetition,seed,status,evaluations,selection_s,embedding_s,classification_s";
        for (const auto& c : classifiers_) out_ << ",error_" << c;
        out_ << ",selected,fitness_trace\n";
        out_.flush();
    }

    void write(const RunRecord& r) {
        out_ << detail::csv_escape(r.selector) << ',' << r.k << ',' << r.repetition << ',' << r.seed << ','
             << detail::csv_escape(r.status) << ',' << r.evaluations << ','
             << detail::format_seconds(r.selection_seconds) << ',' << detail::format_seconds(r.embedding_seconds)
             << ',' << detail::format_seconds(r.classification_seconds);
        for (const auto& c : classifiers_) {
            out_ << ',';
            if (auto it = r.errors.find(c); it != r.errors.end()) out_ << detail::format_double(it->second);
        }
        out_ << ',' << detail::join(r.selected) << ',' << detail::join(r.fitness_trace) << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
    std::vector<std::string> classifiers_;
};

struct SummaryRow {
    std::string selector;
    std::size_t k = 0;
    std::string classifier;
    std::size_t runs = 0;
    double mean_error = 0.0;
    /// Sample (n-1) standard deviation; 0 for a single run.
    double sd_error = 0.0;
    double mean_selection_seconds = 0.0;
    double mean_evaluations = 0.0;
};

/// Mean and sample standard deviation of the error per (selector, k,
/// classifier), in order of first appearance. Failed records are skipped.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
    std::vector<SummaryRow> rows;
    std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) {
        if (!r.ok()) continue;
        for (const auto& [classifier, err] : r.errors) {
            auto key = std::make_tuple(r.selector, r.k, classifier);
            if (groups.find(key) == groups.end()) rows.push_back({r.selector, r.k, classifier});
            groups[key].push_back(&r);
        }
    }
    for (auto& row : rows) {
        const auto& group = groups.at(std::make_tuple(row.selector, row.k, row.classifier));
        const double n = static_cast<double>(group.size());
        row.runs = group.size();
        for (const auto* r : group) {
            row.mean_error += r->errors.at(row.classifier) / n;
            row.mean_selection_seconds += r->selection_seconds / n;
            row.mean_evaluations += static_cast<double>(r->evaluations) / n;
        }
        if (group.size() > 1) {
            double ss = 0.0;
            for (const auto* r : group) ss += std::pow(r->errors.at(row.classifier) - row.mean_error, 2);
            row.sd_error = std::sqrt(ss / (n - 1.0));
        }
    }
    return rows;
}

inline void save_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << "selector,k,classifier,runs,mean_error,sd_error,mean_selection_s,mean_evaluations\n";
    for (const auto& r : rows)
        out << detail::csv_escape(r.selector) << ',' << r.k << ',' << r.classifier << ',' << r.runs << ','
            << detail::format_double(r.mean_error) << ',' << detail::format_double(r.sd_error) << ','
            << detail::format_seconds(r.mean_selection_seconds) << ',' << detail::format_double(r.mean_evaluations)
            << '\n';
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::json to_json(const SelectorOptions& o) {
    return {{"population", o.population_size},   {"rp", o.reproduction_prob}, {"mp", o.mutation_prob},
            {"generations", o.generations},      {"pivots", o.pivots},        {"pivot_rounds", o.pivot_rounds},
            {"kcentres_iters", o.kcentres_iters}};
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json data;
    if (cfg.data.path.empty())
        data = {{"generator", "blobs"},
                {"classes", cfg.data.blobs.classes},
                {"per_class", cfg.data.blobs.per_class},
                {"q", cfg.data.blobs.dimension},
                {"spread", cfg.data.blobs.spread},
                {"seed", cfg.data.blobs.seed}};
    else
        data = {{"path", cfg.data.path.string()}, {"label_column", cfg.data.label_column}};
    return {{"data", data},
            {"measure", cfg.measure},
            {"split", {cfg.split.validation_fraction, cfg.split.train_fraction, cfg.split.test_fraction}},
            {"overlap", cfg.overlap},
            {"selectors", cfg.selectors},
            {"k", cfg.ks},
            {"repetitions", cfg.repetitions},
            {"classifiers", cfg.classifiers},
            {"ldc_reg", cfg.ldc_reg ? nlohmann::json(*cfg.ldc_reg) : nlohmann::json()},
            {"options", to_json(cfg.options)},
            {"seed", cfg.seed}};
}

/// Manifest for one selection: method, parameters, seed, trace and indices.
inline nlohmann::json run_manifest(const PrototypeSet& protos, const nlohmann::json& params,
                                   std::uint64_t revision, std::uint64_t evaluations) {
    return {{"tool", std::string("protosel ") + kVersion},
            {"revision", hex64(revision)},
            {"method", protos.method},
            {"seed", protos.seed},
            {"params", params},
            {"fitness_trace", protos.fitness_trace},
            {"selected", protos.indices},
            {"evaluations", evaluations}};
}

/// Mean wall-clock seconds per GA generation for the MST fitness without
/// clustering, with candidates drawn from `validation`.
inline double mst_generation_seconds(const DissimilarityProvider& provider, std::span<const std::size_t> validation,
                                     std::span<const std::string> labels, const GaParams& params) {
    const auto ctx = make_fitness_context(provider, {validation.begin(), validation.end()}, labels);
    GaParams p = params;
    p.use_clustering = false;
    // Timed from the initial population to the last generation, so one-time
    // setup (pool indexing) is excluded.
    std::optional<detail::Stopwatch> watch;
    double elapsed = 0.0;
    run_ga(ctx, FitnessKind::Mst, p, validation, [&](std::size_t g, std::span<const Individual>) {
        if (g == 0) watch.emplace();
        else if (g == p.generations) elapsed = watch->lap();
    });
    return elapsed / static_cast<double>(p.generations);
}

} // namespace protosel
