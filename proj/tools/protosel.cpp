// protosel: prototype selection for dissimilarity-space classification.
//
//   protosel gen     --classes 10 --per-class 300 --q 5 --spread 0.6 --seed 1 --out blobs.csv
//   protosel select  --data blobs.csv --method ga-sup-clust --k 10 --seed 3 --out run.json
//   protosel pivots  --data blobs.csv --p 64 --seed 1 --out pivots.json
//   protosel bench   --seed 7 --out results/ [--config bench.ini]
//
// Failures print one JSON line on stderr ({"error":{"kind":...,"message":...}})
// and exit nonzero.

#include "protosel.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

namespace {

using namespace protosel;

int report_error(std::string_view kind, const std::string& message, int code = 1) {
    nlohmann::json line = {{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << line.dump() << std::endl;
    return code;
}

struct DataOptions {
    std::string path;
    std::string label_column = "label";
    std::string blobs = "10,300,5,0.6,1";
    std::string measure = "euclidean";

    void add(CLI::App* app) {
        app->add_option("--data", path, "Dataset file (.csv or .bin); synthetic blobs when omitted");
        app->add_option("--label-column", label_column, "CSV label column")->capture_default_str();
        app->add_option("--blobs", blobs, "Blob generator spec classes,per_class,q,spread,seed")
            ->delimiter(',')
            ->multi_option_policy(CLI::MultiOptionPolicy::Join)
            ->capture_default_str();
        app->add_option("--measure", measure, "euclidean | manhattan | minkowski:<p>")->capture_default_str();
    }

    DataSource source() const {
        DataSource src;
        src.path = path;
        src.label_column = label_column;
        std::vector<std::string> parts;
        std::stringstream ss(blobs);
        for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
        require(parts.size() == 5, ErrorKind::Parse, "--blobs expects classes,per_class,q,spread,seed");
        try {
            src.blobs = {std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2]), std::stod(parts[3]),
                         std::stoull(parts[4])};
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, "--blobs has a non-numeric field: '" + blobs + "'");
        }
        return src;
    }
};

/// Flat `key = value` config file whose keys are bench options.
struct BenchConfig : CLI::ConfigINI {
    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        auto items = CLI::ConfigINI::from_config(in);
        for (auto& item : items)
            if (item.parents.empty()) item.parents = {"bench"};
        return items;
    }
};

void add_selector_options(CLI::App* app, SelectorOptions& opt) {
    app->add_option("--population", opt.population_size, "GA individuals")->capture_default_str();
    app->add_option("--rp", opt.reproduction_prob, "GA per-gene reproduction probability")->capture_default_str();
    app->add_option("--mp", opt.mutation_prob, "GA per-gene mutation probability")->capture_default_str();
    app->add_option("--generations", opt.generations, "GA generations")->capture_default_str();
    app->add_option("--pivots", opt.pivots, "Pivot count for the hashing accelerator")->capture_default_str();
    app->add_option("--pivot-rounds", opt.pivot_rounds, "Pivot balancing rounds")->capture_default_str();
    app->add_option("--kcentres-iters", opt.kcentres_iters, "Kcentres iteration limit")->capture_default_str();
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
    out << j.dump(2) << '\n';
}

int cmd_gen(const BlobSpec& spec, const std::string& out) {
    auto ds = generate_blobs(spec.classes, spec.per_class, spec.dimension, spec.spread, spec.seed);
    if (std::filesystem::path(out).extension() == ".bin")
        save_binary(ds, out);
    else
        save_csv(ds, out);
    std::cout << "wrote " << ds.size() << " objects (" << ds.dimension() << " features) to " << out << '\n';
    return 0;
}

int cmd_select(const DataOptions& data, const std::string& method, std::size_t k, std::uint64_t seed,
               const SelectorOptions& opt, const std::string& out, const std::string& embed_csv) {
    auto ds = std::make_shared<const Dataset>(data.source().load());
    const auto provider = DissimilarityProvider::on_demand(ds, Measure::parse(data.measure));
    const auto pool = all_indices(ds->size());
    const auto ctx = make_fitness_context(provider, pool, ds->labels());
    auto protos = run_selector(method, ctx, pool, k, seed, opt);
    const auto evals = provider.evaluations();
    auto params = to_json(opt);
    params["k"] = k;
    params["measure"] = data.measure;
    write_json(run_manifest(protos, params, ds->revision(), evals), out);
    if (!embed_csv.empty()) save_embedding_csv(embed(provider, pool, protos), ds->labels(), embed_csv);
    return 0;
}

int cmd_pivots(const DataOptions& data, std::size_t p, std::uint64_t seed, std::size_t rounds,
               const std::string& out) {
    auto ds = std::make_shared<const Dataset>(data.source().load());
    const auto provider = DissimilarityProvider::on_demand(ds, Measure::parse(data.measure));
    const auto table = train_pivots(provider, all_indices(ds->size()), p, seed, rounds);
    auto j = to_json(table);
    j["revision_hex"] = hex64(table.dataset_revision);
    write_json(j, out);
    return 0;
}

int cmd_bench(ExperimentConfig cfg, const DataOptions& data, const std::string& split_text, const std::string& out,
              double ldc_reg, bool scaling) {
    cfg.data = data.source();
    cfg.measure = data.measure;
    {
        std::vector<double> f;
        std::stringstream ss(split_text);
        bool all_ok = true;
        for (std::string part; std::getline(ss, part, ',');) {
            bool ok = false;
            f.push_back(detail::parse_double(part, ok));
            all_ok = all_ok && ok;
        }
        require(all_ok && f.size() == 3, ErrorKind::Parse, "--split expects validation,train,test fractions");
        cfg.split = {f[0], f[1], f[2], 0};
    }
    if (ldc_reg >= 0.0) cfg.ldc_reg = ldc_reg;

    if (scaling) {
        // Per-generation GA-MST time at |V| and 2|V| over 5 trials each.
        auto ds = std::make_shared<const Dataset>(cfg.data.load());
        const auto provider = DissimilarityProvider::on_demand(ds, Measure::parse(cfg.measure));
        const std::size_t half = ds->size() / 2;
        GaParams params;
        params.prototypes = cfg.ks.front();
        params.population_size = cfg.options.population_size;
        params.generations = cfg.options.generations;
        params.mutation_prob = cfg.options.mutation_prob;
        params.reproduction_prob = cfg.options.reproduction_prob;
        double t_half = 0.0, t_full = 0.0;
        const auto full = all_indices(ds->size());
        const std::vector<std::size_t> first(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(half));
        for (std::uint64_t trial = 0; trial < 5; ++trial) {
            params.seed = derive_seed(cfg.seed, {tag("scaling"), trial});
            t_half += mst_generation_seconds(provider, first, ds->labels(), params) / 5.0;
            t_full += mst_generation_seconds(provider, full, ds->labels(), params) / 5.0;
        }
        nlohmann::json j = {{"n_half", half},           {"n_full", ds->size()},
                            {"seconds_per_generation_half", t_half},
                            {"seconds_per_generation_full", t_full},
                            {"ratio", t_half > 0 ? t_full / t_half : 0.0}};
        std::cout << j.dump() << '\n';
        return 0;
    }

    std::filesystem::create_directories(out);
    const auto dir = std::filesystem::path(out);
    RecordWriter writer(dir / "records.csv", cfg.classifiers);
    const auto records = run_experiment(cfg, [&](const RunRecord& r) {
        writer.write(r);
        std::cerr << r.selector << " k=" << r.k << " rep=" << r.repetition << ' ' << r.status << '\n';
    });
    save_summary_csv(summarize(records), dir / "summary.csv");

    const auto ds = cfg.data.load();
    nlohmann::json manifest = {{"tool", std::string("protosel ") + kVersion},
                               {"revision", hex64(ds.revision())},
                               {"config", to_json(cfg)},
                               {"records", records.size()}};
    write_json(manifest, (dir / "manifest.json").string());
    std::cout << "wrote " << records.size() << " records to " << dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prototype selection for dissimilarity-space classification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key = value file of bench options (command-line flags win)");
    app.config_formatter(std::make_shared<BenchConfig>());
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();

    BlobSpec gen_spec;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic Gaussian-blob dataset");
    gen->add_option("--classes", gen_spec.classes)->capture_default_str();
    gen->add_option("--per-class", gen_spec.per_class)->capture_default_str();
    gen->add_option("--q", gen_spec.dimension, "Feature count")->capture_default_str();
    gen->add_option("--spread", gen_spec.spread, "Within-class standard deviation")->capture_default_str();
    gen->add_option("--seed", gen_spec.seed)->capture_default_str();
    gen->add_option("--out", gen_out, "Output .csv or .bin")->required();

    DataOptions sel_data;
    SelectorOptions sel_opt;
    std::string method = "ga-sup-clust", sel_out, embed_out;
    std::size_t sel_k = 10;
    std::uint64_t sel_seed = 0;
    auto* select = app.add_subcommand("select", "Run one selector over the whole dataset");
    sel_data.add(select);
    add_selector_options(select, sel_opt);
    select->add_option("--method", method, "Selector name")
        ->check(CLI::IsMember(known_selectors()))
        ->capture_default_str();
    select->add_option("--k", sel_k, "Number of prototypes")->capture_default_str();
    select->add_option("--seed", sel_seed)->capture_default_str();
    select->add_option("--out", sel_out, "Run manifest path (stdout when omitted)");
    select->add_option("--embed-csv", embed_out, "Also write the embedding of all objects");

    DataOptions piv_data;
    std::size_t piv_p = 64, piv_rounds = 16;
    std::uint64_t piv_seed = 0;
    std::string piv_out;
    auto* pivots = app.add_subcommand("pivots", "Train a pivot table for the hashing accelerator");
    piv_data.add(pivots);
    pivots->add_option("--p", piv_p, "Pivot count (power of two)")->capture_default_str();
    pivots->add_option("--seed", piv_seed)->capture_default_str();
    pivots->add_option("--rounds", piv_rounds, "Balancing rounds")->capture_default_str();
    pivots->add_option("--out", piv_out, "Output JSON (stdout when omitted)");

    ExperimentConfig cfg;
    DataOptions bench_data;
    std::string split_text = "0.6,0.2,0.2", bench_out = "results";
    double ldc_reg = -1.0;
    bool scaling = false;
    auto* bench = app.add_subcommand("bench", "Full selector x k x repetition sweep");
    bench_data.add(bench);
    add_selector_options(bench, cfg.options);
    bench->add_option("--selectors", cfg.selectors, "Comma-separated selector names")
        ->delimiter(',')
        ->check(CLI::IsMember(known_selectors()))
        ->capture_default_str();
    bench->add_option("--k", cfg.ks, "Comma-separated prototype counts")->delimiter(',')->capture_default_str();
    bench->add_option("--repetitions", cfg.repetitions)->capture_default_str();
    bench->add_option("--classifiers", cfg.classifiers, "1nn and/or ldc")
        ->delimiter(',')
        ->check(CLI::IsMember({"1nn", "ldc"}))
        ->capture_default_str();
    bench->add_option("--split", split_text, "validation,train,test fractions")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::Join)
        ->capture_default_str();
    bench->add_flag("--overlap", cfg.overlap, "Train classifiers on the validation set");
    bench->add_option("--ldc-reg", ldc_reg, "LDC ridge (default: scaled to the covariance trace)");
    bench->add_option("--seed", cfg.seed, "Master seed")->required();
    bench->add_option("--out", bench_out, "Output directory")->capture_default_str();
    bench->add_flag("--scaling", scaling, "Report GA-MST per-generation time at |V|/2 and |V| instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error("usage", e.what(), 2);
    }

    try {
        if (*gen) return cmd_gen(gen_spec, gen_out);
        if (*select) return cmd_select(sel_data, method, sel_k, sel_seed, sel_opt, sel_out, embed_out);
        if (*pivots) return cmd_pivots(piv_data, piv_p, piv_seed, piv_rounds, piv_out);
        if (*bench) return cmd_bench(cfg, bench_data, split_text, bench_out, ldc_reg, scaling);
    } catch (const Error& e) {
        return report_error(to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
        return report_error("internal", e.what());
    }
    return 0;
}
