#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lsi/lsi.hpp"

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw lsi::Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

lsi::MapConfig parse_map(const std::string& text)
{
    if (auto family = lsi::bc_family_from_string(text))
        return lsi::MapConfig::preset(*family);
    return lsi::MapConfig::parse(text);
}

int cmd_run(const std::string& config_path, int workers)
{
    lsi::ExperimentConfig cfg = lsi::load_experiment_config(config_path);
    if (workers > 0)
        cfg.workers = workers;
    const lsi::SummaryReport report = lsi::run_experiment(cfg);
    std::printf("%-8s %6s %18s %18s %18s %18s\n", "alg", "trials", "valid/all", "coverage", "valid/found", "qd_score");
    for (const auto& r : report.rows)
        std::printf("%-8s %6d %9.4f+-%-7.4f %9.4f+-%-7.4f %9.4f+-%-7.4f %9.1f+-%-7.1f\n", r.algorithm.c_str(), r.trials,
                    r.valid_over_all.mean, r.valid_over_all.half_width, r.coverage.mean, r.coverage.half_width,
                    r.valid_over_found.mean, r.valid_over_found.half_width, r.qd_score.mean, r.qd_score.half_width);
    std::printf("results in %s (evaluator: %s)\n", report.output_dir.string().c_str(), lsi::kEvaluatorTag);
    for (const auto& f : report.failures)
        std::fprintf(stderr, "trial failed: %s\n", f.c_str());
    return report.failures.empty() ? 0 : 2;
}

int cmd_simulate(const std::string& scene_path, std::size_t budget, const std::string& trace_path, const std::string& alphabet_path)
{
    const lsi::TileAlphabet alphabet = lsi::load_alphabet_or_default(alphabet_path);
    const lsi::TileGrid grid = lsi::parse_scene(slurp(scene_path), alphabet);
    const lsi::Level level = lsi::make_level(grid, alphabet);
    lsi::AStarOptions opts;
    opts.node_budget = budget;
    const lsi::PlaythroughTrace trace = lsi::astar_play(level, opts);

    nlohmann::json events = nlohmann::json::object();
    const auto bits = lsi::classify_events(trace);
    for (int i = 0; i < lsi::kNumEvents; ++i)
        events[std::string(lsi::kEventNames[static_cast<std::size_t>(i)])] = bits[static_cast<std::size_t>(i)];
    nlohmann::json summary{{"completion", trace.completion}, {"success", trace.success}, {"steps", trace.steps},
                           {"nodes_expanded", trace.nodes_expanded}, {"events", events}};
    std::cout << summary.dump(2) << '\n';

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        if (!out)
            throw lsi::Error("cannot write '" + trace_path + "'");
        const auto states = lsi::replay(level, trace.actions);
        for (std::size_t i = 0; i < states.size(); ++i) {
            const lsi::SimState& s = states[i];
            nlohmann::json enemies = nlohmann::json::array();
            for (const auto& e : s.entities)
                enemies.push_back({e.row, e.col});
            nlohmann::json line{{"tick", s.tick},
                                {"action", i == 0 ? "spawn" : std::string(lsi::to_string(trace.actions[i - 1]))},
                                {"row", s.row},
                                {"col", s.col},
                                {"phase", s.phase},
                                {"power", s.power == lsi::Power::Super ? "super" : "small"},
                                {"dead", s.dead},
                                {"finished", s.finished},
                                {"events", s.events},
                                {"entities", enemies}};
            out << line.dump() << '\n';
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Latent-space illumination of platformer scenes"};
    app.require_subcommand(1);

    std::string config_path;
    int workers = 0;
    auto* run = app.add_subcommand("run", "Run every algorithm/trial in an experiment config");
    run->add_option("config", config_path, "INI experiment file")->required()->check(CLI::ExistingFile);
    run->add_option("-j,--workers", workers, "Parallel trials (overrides the config)");

    std::string archive_path, out_path, map_text = "representation";
    auto* heatmap = app.add_subcommand("heatmap", "Render a 2-D archive CSV as a fitness heatmap");
    heatmap->add_option("archive", archive_path, "Archive CSV")->required()->check(CLI::ExistingFile);
    heatmap->add_option("-o,--out", out_path, "Output prefix (.csv and .ppm are appended)")->required();
    heatmap->add_option("--map", map_text, "Map preset or lo:hi:bins[:int],... axes")->capture_default_str();

    std::string select = "extremes", extract_config, extract_out = "scenes";
    std::uint64_t extract_seed = 0;
    auto* extract = app.add_subcommand("extract", "Decode selected elites back into scene files");
    extract->add_option("archive", archive_path, "Archive CSV")->required()->check(CLI::ExistingFile);
    extract->add_option("--select", select, "extremes | uniform-K | cells:a.b;c.d")->capture_default_str();
    extract->add_option("-c,--config", extract_config, "Experiment config that produced the archive");
    extract->add_option("-o,--out", extract_out, "Output directory")->capture_default_str();
    extract->add_option("--seed", extract_seed, "Seed for uniform selection");

    std::string scene_path, trace_path, alphabet_path;
    std::size_t budget = lsi::AStarOptions{}.node_budget;
    auto* simulate = app.add_subcommand("simulate", "Play a scene file with the A* agent");
    simulate->add_option("scene", scene_path, "16x56 scene text")->required()->check(CLI::ExistingFile);
    simulate->add_option("--budget", budget, "A* expansion budget")->capture_default_str();
    simulate->add_option("--trace", trace_path, "Write per-tick states as JSON lines");
    simulate->add_option("--alphabet", alphabet_path, "Tile alphabet override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(config_path, workers);
        if (*heatmap) {
            lsi::export_heatmap(archive_path, out_path, parse_map(map_text));
            std::printf("wrote %s.csv and %s.ppm\n", out_path.c_str(), out_path.c_str());
            return 0;
        }
        if (*extract) {
            lsi::ExperimentConfig cfg;
            cfg.algorithms.push_back(lsi::AlgorithmConfig::preset(lsi::Algorithm::Random));
            if (!extract_config.empty())
                cfg = lsi::load_experiment_config(extract_config);
            const lsi::TileAlphabet alphabet = lsi::load_alphabet_or_default(cfg.alphabet);
            const lsi::SceneEvaluator evaluator(lsi::SceneDecoder::from_source(cfg.generator, alphabet),
                                                lsi::SceneScorer(lsi::make_bc_config(cfg, alphabet), cfg.sim, alphabet));
            auto selection = lsi::SceneSelection::parse(select);
            selection.seed = extract_seed;
            const auto scenes = lsi::extract_scenes(archive_path, evaluator, cfg.map_config(), selection, extract_out);
            std::size_t bad = 0;
            for (const auto& s : scenes) {
                std::printf("%s fitness=%g%s\n", s.path.string().c_str(), s.record.fitness, s.consistent ? "" : " (BC mismatch)");
                bad += s.consistent ? 0 : 1;
            }
            return bad == 0 ? 0 : 3;
        }
        if (*simulate)
            return cmd_simulate(scene_path, budget, trace_path, alphabet_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
