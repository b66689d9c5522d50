#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lsi/behavior_metrics.hpp"
#include "lsi/csv.hpp"
#include "lsi/generator.hpp"
#include "lsi/optimizers.hpp"
#include "lsi/qd_core.hpp"

namespace lsi {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "LSI_OUTPUT_ROOT";
inline constexpr const char* kEvaluatorTag = "surrogate-astar";

struct ExperimentConfig {
    std::string generator = "synthetic";
    std::string alphabet; // optional override file
    BCFamily family = BCFamily::Representation;
    int sky_row = 11;
    std::string truth1, truth2;
    int window = 2;
    double epsilon = 1e-5;
    std::optional<MapConfig> map;
    std::vector<AlgorithmConfig> algorithms;
    int trials = 1;
    std::size_t evaluations = 10000;
    std::uint64_t base_seed = 0;
    std::string output_dir = "results";
    AStarOptions sim;
    int workers = 1;

    MapConfig map_config() const { return map ? *map : MapConfig::preset(family); }

    void validate() const
    {
        if (trials < 1)
            throw ConfigError("trials must be >= 1");
        if (evaluations < 1)
            throw ConfigError("evaluations must be >= 1");
        if (algorithms.empty())
            throw ConfigError("at least one algorithm is required");
        if (workers < 1)
            throw ConfigError("workers must be >= 1");
        if (sim.node_budget < 1)
            throw ConfigError("sim node budget must be >= 1");
        if (family == BCFamily::KL && (truth1.empty() || truth2.empty()))
            throw ConfigError("kl family needs kl.truth1 and kl.truth2");
        const MapConfig m = map_config();
        m.validate();
        if (m.dims.size() != BCConfig{family}.dimensions())
            throw ConfigError("map dimensionality does not match the BC family");
    }
};

namespace detail {

    // ptree::get with a default swallows conversion errors; this one lets them through
    template <typename T>
    T ini_value(const boost::property_tree::ptree& tree, const std::string& path, T fallback)
    {
        return tree.get_child_optional(path) ? tree.get<T>(path) : fallback;
    }

    inline std::string resolve(const fs::path& base, const std::string& p)
    {
        if (p.empty() || p == "synthetic" || fs::path(p).is_absolute())
            return p;
        return (base / p).lexically_normal().string();
    }

    inline std::vector<std::string> split_list(const std::string& s)
    {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (!item.empty())
                out.push_back(item);
        }
        return out;
    }

    inline std::string read_file(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error("cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

} // namespace detail

/// Parses an INI experiment file. Relative paths resolve against the file's directory.
inline ExperimentConfig parse_experiment_config(std::istream& in, const fs::path& base_dir = ".")
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        cfg.generator = detail::resolve(base_dir, detail::ini_value<std::string>(tree, "experiment.generator", "synthetic"));
        cfg.alphabet = detail::resolve(base_dir, detail::ini_value<std::string>(tree, "experiment.alphabet", ""));
        const auto bc = detail::ini_value<std::string>(tree, "experiment.bc", "representation");
        auto family = bc_family_from_string(bc);
        if (!family)
            throw ConfigError("unknown BC family '" + bc + "'");
        cfg.family = *family;
        cfg.trials = detail::ini_value<int>(tree, "experiment.trials", 1);
        cfg.evaluations = detail::ini_value<std::size_t>(tree, "experiment.evaluations", 10000);
        cfg.base_seed = detail::ini_value<std::uint64_t>(tree, "experiment.seed", 0);
        cfg.output_dir = detail::ini_value<std::string>(tree, "experiment.output", "results");
        cfg.workers = detail::ini_value<int>(tree, "experiment.workers", 1);

        cfg.sky_row = detail::ini_value<int>(tree, "representation.sky_row", 11);
        cfg.truth1 = detail::resolve(base_dir, detail::ini_value<std::string>(tree, "kl.truth1", ""));
        cfg.truth2 = detail::resolve(base_dir, detail::ini_value<std::string>(tree, "kl.truth2", ""));
        cfg.window = detail::ini_value<int>(tree, "kl.window", 2);
        cfg.epsilon = detail::ini_value<double>(tree, "kl.epsilon", 1e-5);

        if (auto axes = tree.get_optional<std::string>("map.axes"))
            cfg.map = MapConfig::parse(*axes);

        cfg.sim.node_budget = detail::ini_value<std::size_t>(tree, "sim.node_budget", cfg.sim.node_budget);
        cfg.sim.tick_budget = detail::ini_value<int>(tree, "sim.tick_budget", cfg.sim.tick_budget);

        const auto names = detail::split_list(detail::ini_value<std::string>(tree, "experiment.algorithms", "random,cmaes,me,me-line,cmame"));
        for (const auto& name : names) {
            auto alg = algorithm_from_string(name);
            if (!alg)
                throw ConfigError("unknown algorithm '" + name + "'");
            AlgorithmConfig a = AlgorithmConfig::preset(*alg, cfg.evaluations);
            const std::string sec = name + ".";
            a.lambda = detail::ini_value<int>(tree, sec + "lambda", a.lambda);
            a.sigma = detail::ini_value<double>(tree, sec + "sigma", a.sigma);
            a.sigma1 = detail::ini_value<double>(tree, sec + "sigma1", a.sigma1);
            a.sigma2 = detail::ini_value<double>(tree, sec + "sigma2", a.sigma2);
            a.emitters = detail::ini_value<int>(tree, sec + "emitters", a.emitters);
            a.initial_population = detail::ini_value<int>(tree, sec + "initial_population", a.initial_population);
            a.batch_size = detail::ini_value<int>(tree, sec + "batch_size", a.batch_size);
            a.restart_patience = detail::ini_value<int>(tree, sec + "restart_patience", a.restart_patience);
            a.random_log_interval = detail::ini_value<int>(tree, sec + "log_interval", a.random_log_interval);
            cfg.algorithms.push_back(a);
        }
    } catch (const pt::ptree_bad_data& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config '" + path + "'");
    return parse_experiment_config(in, fs::path(path).parent_path());
}

inline TileAlphabet load_alphabet_or_default(const std::string& path)
{
    if (path.empty())
        return default_alphabet();
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open alphabet '" + path + "'");
    return load_alphabet(in);
}

inline BCConfig make_bc_config(const ExperimentConfig& cfg, const TileAlphabet& alphabet)
{
    BCConfig bc;
    bc.family = cfg.family;
    bc.sky_row = cfg.sky_row;
    bc.window = cfg.window;
    bc.epsilon = cfg.epsilon;
    if (cfg.family == BCFamily::KL) {
        bc.truths.push_back(parse_scene(detail::read_file(cfg.truth1), alphabet));
        bc.truths.push_back(parse_scene(detail::read_file(cfg.truth2), alphabet));
    }
    return bc;
}

/// Output directory after applying the LSI_OUTPUT_ROOT override to relative paths.
inline fs::path output_directory(const ExperimentConfig& cfg)
{
    fs::path out(cfg.output_dir);
    if (const char* root = std::getenv(kOutputRootEnv); root && *root && out.is_relative())
        out = fs::path(root) / out;
    return out;
}

inline void write_metrics_csv(std::ostream& out, const MetricsLog& log)
{
    out << "evaluations,coverage,qd_score,valid_over_all,valid_over_found,evaluator\n";
    for (const auto& r : log)
        out << r.evaluations << ',' << csv::format(r.coverage) << ',' << csv::format(r.qd_score) << ','
            << csv::format(r.valid_over_all) << ',' << csv::format(r.valid_over_found) << ',' << kEvaluatorTag << '\n';
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in)
{
    std::string line;
    std::getline(in, line);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto f = csv::split(line);
        if (f.size() != 6)
            throw csv::CsvError("metrics CSV row has " + std::to_string(f.size()) + " fields");
        rows.push_back({static_cast<std::size_t>(csv::to_int(f[0])), csv::to_double(f[1]), csv::to_double(f[2]),
                        csv::to_double(f[3]), csv::to_double(f[4])});
    }
    return rows;
}

/// Mean and 95% confidence half-width (Student t over trials; 0 for a single trial).
struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;
};

inline MeanCi mean_ci95(const std::vector<double>& xs)
{
    MeanCi r;
    if (xs.empty())
        return r;
    const double n = static_cast<double>(xs.size());
    for (double x : xs)
        r.mean += x;
    r.mean /= n;
    if (xs.size() < 2)
        return r;
    double ss = 0.0;
    for (double x : xs)
        ss += (x - r.mean) * (x - r.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    boost::math::students_t dist(n - 1.0);
    r.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
    return r;
}

struct SummaryRow {
    std::string algorithm;
    int trials = 0;
    MeanCi valid_over_all, coverage, valid_over_found, qd_score;
    std::vector<MetricsRow> finals;
};

struct SummaryReport {
    std::vector<SummaryRow> rows;
    std::vector<std::string> failures;
    fs::path output_dir;
};

inline void write_summary_csv(std::ostream& out, const SummaryReport& report)
{
    out << "algorithm,trials,valid_over_all_mean,valid_over_all_ci95,coverage_mean,coverage_ci95,"
           "valid_over_found_mean,valid_over_found_ci95,qd_score_mean,qd_score_ci95,evaluator\n";
    for (const auto& r : report.rows)
        out << r.algorithm << ',' << r.trials << ',' << csv::format(r.valid_over_all.mean) << ','
            << csv::format(r.valid_over_all.half_width) << ',' << csv::format(r.coverage.mean) << ','
            << csv::format(r.coverage.half_width) << ',' << csv::format(r.valid_over_found.mean) << ','
            << csv::format(r.valid_over_found.half_width) << ',' << csv::format(r.qd_score.mean) << ','
            << csv::format(r.qd_score.half_width) << ',' << kEvaluatorTag << '\n';
}

/// Runs every (algorithm, trial) pair, writing archive_<alg>_<trial>.csv and
/// metrics_<alg>_<trial>.csv per trial and summary.csv at the end. Trial t uses seed base_seed + t.
inline SummaryReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const TileAlphabet alphabet = load_alphabet_or_default(cfg.alphabet);
    const SceneDecoder decoder = SceneDecoder::from_source(cfg.generator, alphabet);
    const BCConfig bc = make_bc_config(cfg, alphabet);
    const SceneEvaluator evaluator(decoder, SceneScorer(bc, cfg.sim, alphabet));
    const MapConfig map = cfg.map_config();

    SummaryReport report;
    report.output_dir = output_directory(cfg);
    fs::create_directories(report.output_dir);

    struct Task {
        std::size_t alg;
        int trial;
        std::optional<MetricsRow> final_row;
        std::string error;
    };
    std::vector<Task> tasks;
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
        for (int t = 0; t < cfg.trials; ++t)
            tasks.push_back({a, t, std::nullopt, {}});

    auto run_task = [&](Task& task) {
        AlgorithmConfig alg = cfg.algorithms[task.alg];
        alg.budget = cfg.evaluations;
        alg.seed = cfg.base_seed + static_cast<std::uint64_t>(task.trial);
        const std::string stem = std::string(to_string(alg.algorithm)) + "_" + std::to_string(task.trial);
        Archive archive(map);
        MetricsLog log;
        try {
            SceneEvaluator local = evaluator;
            log = run(alg, local, archive);
        } catch (const std::exception& e) {
            task.error = stem + ": " + e.what();
        }
        // partial results are still flushed when a trial fails
        std::ofstream(report.output_dir / ("archive_" + stem + ".csv"), std::ios::binary) << [&] {
            std::ostringstream ss;
            write_archive_csv(ss, archive);
            return ss.str();
        }();
        std::ofstream(report.output_dir / ("metrics_" + stem + ".csv"), std::ios::binary) << [&] {
            std::ostringstream ss;
            write_metrics_csv(ss, log);
            return ss.str();
        }();
        if (task.error.empty() && !log.empty())
            task.final_row = log.back();
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
            run_task(tasks[i]);
    };
    const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < width; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();

    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
        SummaryRow row;
        row.algorithm = std::string(to_string(cfg.algorithms[a].algorithm));
        std::vector<double> va, cov, vf, qd;
        for (const auto& task : tasks) {
            if (task.alg != a)
                continue;
            if (!task.error.empty())
                report.failures.push_back(task.error);
            if (!task.final_row)
                continue;
            row.finals.push_back(*task.final_row);
            va.push_back(task.final_row->valid_over_all);
            cov.push_back(task.final_row->coverage);
            vf.push_back(task.final_row->valid_over_found);
            qd.push_back(task.final_row->qd_score);
        }
        row.trials = static_cast<int>(row.finals.size());
        row.valid_over_all = mean_ci95(va);
        row.coverage = mean_ci95(cov);
        row.valid_over_found = mean_ci95(vf);
        row.qd_score = mean_ci95(qd);
        report.rows.push_back(std::move(row));
    }

    std::ofstream summary(report.output_dir / "summary.csv", std::ios::binary);
    write_summary_csv(summary, report);
    return report;
}

/// Reads an archive CSV and writes <out>.csv (fitness grid, -1 for empty) and <out>.ppm.
inline std::vector<std::vector<double>> export_heatmap(const std::string& archive_csv, const std::string& out_prefix, const MapConfig& map)
{
    std::ifstream in(archive_csv);
    if (!in)
        throw Error("cannot open archive '" + archive_csv + "'");
    std::size_t dims = 0;
    const auto rows = read_archive_csv(in, &dims);
    if (dims != 2 || map.dims.size() != 2)
        throw NotTwoDimensional();
    auto grid = heatmap_grid(map, rows);
    std::ofstream csv_out(out_prefix + ".csv", std::ios::binary);
    write_heatmap_csv(csv_out, grid);
    std::ofstream ppm_out(out_prefix + ".ppm", std::ios::binary);
    write_heatmap_ppm(ppm_out, grid);
    return grid;
}

struct SceneSelection {
    enum class Kind { Extremes, Uniform, Cells };
    Kind kind = Kind::Extremes;
    std::size_t count = 10;
    std::vector<std::vector<int>> cells;
    std::uint64_t seed = 0;

    /// "extremes", "uniform-K" or "cells:a.b;c.d" (coordinates separated by '.').
    static SceneSelection parse(const std::string& text)
    {
        SceneSelection s;
        if (text == "extremes")
            return s;
        if (text.rfind("uniform-", 0) == 0) {
            s.kind = Kind::Uniform;
            s.count = static_cast<std::size_t>(csv::to_int(text.substr(8)));
            return s;
        }
        if (text.rfind("cells:", 0) == 0) {
            s.kind = Kind::Cells;
            for (auto cell : csv::split(std::string_view(text).substr(6), ';')) {
                std::vector<int> coords;
                for (auto c : csv::split(cell, '.'))
                    coords.push_back(static_cast<int>(csv::to_int(c)));
                s.cells.push_back(std::move(coords));
            }
            return s;
        }
        throw ConfigError("unknown selection '" + text + "'");
    }
};

class CellNotFound : public Error {
public:
    explicit CellNotFound(const std::string& cell) : Error("no elite in cell " + cell) {}
};

struct ExtractedScene {
    fs::path path;
    ArchiveRecord record;
    TileGrid grid;
    bool consistent = false; // recomputed BCs map back to the recorded cell
};

/// Selects elites from an archive CSV, re-decodes them and writes scene_<n>.txt files plus manifest.csv.
inline std::vector<ExtractedScene> extract_scenes(const std::string& archive_csv, const SceneEvaluator& evaluator,
                                                  const MapConfig& map, const SceneSelection& selection, const fs::path& out_dir)
{
    std::ifstream in(archive_csv);
    if (!in)
        throw Error("cannot open archive '" + archive_csv + "'");
    const auto rows = read_archive_csv(in);

    std::vector<std::size_t> picked;
    auto add = [&picked](std::size_t i) {
        if (std::find(picked.begin(), picked.end(), i) == picked.end())
            picked.push_back(i);
    };
    switch (selection.kind) {
    case SceneSelection::Kind::Extremes:
        if (!rows.empty())
            for (std::size_t d = 0; d < rows.front().bc.size(); ++d) {
                auto by_dim = [d](const ArchiveRecord& a, const ArchiveRecord& b) { return a.bc[d] < b.bc[d]; };
                add(static_cast<std::size_t>(std::min_element(rows.begin(), rows.end(), by_dim) - rows.begin()));
                add(static_cast<std::size_t>(std::max_element(rows.begin(), rows.end(), by_dim) - rows.begin()));
            }
        break;
    case SceneSelection::Kind::Uniform: {
        std::vector<std::size_t> all(rows.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::mt19937_64 rng(selection.seed);
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(std::min(all.size(), selection.count));
        std::sort(all.begin(), all.end());
        picked = all;
        break;
    }
    case SceneSelection::Kind::Cells:
        for (const auto& cell : selection.cells) {
            auto it = std::find_if(rows.begin(), rows.end(), [&cell](const ArchiveRecord& r) { return r.cell == cell; });
            if (it == rows.end()) {
                std::string name;
                for (int c : cell)
                    name += (name.empty() ? "" : ".") + std::to_string(c);
                throw CellNotFound(name);
            }
            add(static_cast<std::size_t>(it - rows.begin()));
        }
        break;
    }

    fs::create_directories(out_dir);
    std::ofstream manifest(out_dir / "manifest.csv", std::ios::binary);
    manifest << "file,cell,bc,fitness,consistent\n";
    std::vector<ExtractedScene> out;
    for (std::size_t n = 0; n < picked.size(); ++n) {
        const ArchiveRecord& r = rows[picked[n]];
        ExtractedScene s;
        s.record = r;
        s.grid = evaluator.decoder()(r.latent);
        const EvaluatedScene re = evaluator(r.latent);
        s.consistent = bc_to_cell(map, re.evaluation.bc).coords == r.cell;
        s.path = out_dir / ("scene_" + std::to_string(n) + ".txt");
        std::ofstream(s.path, std::ios::binary) << render_scene(s.grid, evaluator.decoder().alphabet());

        std::string cell, bc;
        for (int c : r.cell)
            cell += (cell.empty() ? "" : " ") + std::to_string(c);
        for (double b : r.bc)
            bc += (bc.empty() ? "" : " ") + csv::format(b);
        manifest << s.path.filename().string() << ',' << cell << ',' << bc << ',' << csv::format(r.fitness) << ','
                 << (s.consistent ? "true" : "false") << '\n';
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace lsi
