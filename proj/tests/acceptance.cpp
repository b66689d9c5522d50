// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "lsi/lsi.hpp"

using namespace lsi;
namespace fs = std::filesystem;

namespace tol {
constexpr double sphere_target = 1e-8;
constexpr int sphere_budget = 30000;
constexpr double sphere_seconds = 10.0;
constexpr double symmetry = 1e-10;
constexpr int random_tells = 1000;
constexpr long insertions = 1000000;
constexpr int qd_trials = 5;
constexpr std::size_t qd_evaluations = 10000;
constexpr double qd_minutes = 15.0;
constexpr double kl_oracle = 1e-12;
constexpr double dense_oracle = 1e-6;
constexpr int round_trip_scenes = 50;
constexpr int sim_repeats = 100;
constexpr double wall_completion = 0.36;
} // namespace tol

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail)
{
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << "  (" << detail << ")" << std::endl;
    if (!pass)
        ++failures;
}

std::string fmt(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

std::string read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int tile(char c) { return *default_alphabet().index_of(c); }

TileGrid flat_scene()
{
    TileGrid g = TileGrid::filled(tile('-'));
    for (int c = 0; c < kSceneCols; ++c)
        g(14, c) = g(15, c) = static_cast<std::uint8_t>(tile('X'));
    return g;
}

// 1. CMA-ES on the 32-D sphere
void sphere()
{
    const auto t0 = Clock::now();
    std::vector<int> used;
    std::vector<double> bests;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        EmitterState s = EmitterState::create(Eigen::VectorXd::Ones(32), 0.5, 17);
        double best = 1e300;
        int evals = 0;
        while (evals < tol::sphere_budget && best > tol::sphere_target) {
            std::vector<std::pair<Eigen::VectorXd, double>> ranked;
            for (auto& x : cma_ask(s, rng)) {
                const double f = x.squaredNorm();
                best = std::min(best, f);
                ranked.emplace_back(std::move(x), -f);
            }
            evals += 17;
            cma_tell(s, ranked);
        }
        used.push_back(best <= tol::sphere_target ? evals : tol::sphere_budget + 1);
        bests.push_back(best);
    }
    const double elapsed = seconds_since(t0);
    std::sort(used.begin(), used.end());
    std::sort(bests.begin(), bests.end());
    const double median_evals = 0.5 * (used[4] + used[5]);
    const double median_best = 0.5 * (bests[4] + bests[5]);
    report(1, "CMA-ES sphere-32 convergence",
           median_best <= tol::sphere_target && median_evals <= tol::sphere_budget && elapsed < tol::sphere_seconds,
           "median evals " + fmt(median_evals) + ", median best " + fmt(median_best) + ", " + fmt(elapsed) + " s");
}

// 2. covariance stays SPD under random rankings
void covariance_health()
{
    Rng rng(7);
    std::mt19937_64 keys(8);
    std::uniform_real_distribution<double> u;
    EmitterState s = EmitterState::create(Eigen::VectorXd::Zero(32), 0.5, 17);
    bool sigma_ok = true;
    for (int g = 0; g < tol::random_tells; ++g) {
        std::vector<std::pair<Eigen::VectorXd, double>> ranked;
        for (auto& x : cma_ask(s, rng))
            ranked.emplace_back(std::move(x), u(keys));
        cma_tell(s, ranked);
        sigma_ok = sigma_ok && std::isfinite(s.sigma) && s.sigma > 0.0;
    }
    const double asym = (s.cov - s.cov.transpose()).cwiseAbs().maxCoeff();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.cov).eigenvalues().minCoeff();
    report(2, "CMA-ES covariance symmetric positive definite", asym <= tol::symmetry && min_eig > 0.0 && sigma_ok,
           "asymmetry " + fmt(asym) + ", min eigenvalue " + fmt(min_eig) + ", sigma " + fmt(s.sigma));
}

// 3. archive invariants and improvement ranking
void archive_laws()
{
    const MapConfig map = MapConfig::representation();
    Archive a(map);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> sky(-5.0, 160.0), enemies(-2.0, 30.0), fit(-0.2, 1.2);
    double cov = 0.0, qd = 0.0;
    bool monotone = true;
    for (long i = 0; i < tol::insertions; ++i) {
        Elite e;
        e.evaluation.bc = {std::floor(sky(rng)), std::floor(enemies(rng))};
        e.evaluation.fitness = std::clamp(fit(rng), 0.0, 1.0);
        e.cell = bc_to_cell(map, e.evaluation.bc);
        e.discovered_at = static_cast<std::size_t>(i);
        a.try_insert(std::move(e));
        monotone = monotone && a.coverage() >= cov && a.qd_score() >= qd;
        cov = a.coverage();
        qd = a.qd_score();
    }
    std::set<std::size_t> cells;
    bool remap = true;
    for (const auto& [flat, e] : a.elites()) {
        cells.insert(e.cell.flat);
        remap = remap && flat == e.cell.flat && bc_to_cell(map, e.evaluation.bc) == e.cell;
    }
    const bool unique = cells.size() == a.size();

    // exhaustive: every ordering of six candidate outcomes
    using Kind = InsertResult::Kind;
    std::vector<std::pair<InsertResult, double>> pool{{{Kind::NewCell, 0.0}, 0.3}, {{Kind::NewCell, 0.0}, 0.8},
                                                      {{Kind::Improved, 0.2}, 0.9}, {{Kind::Improved, 0.5}, 0.6},
                                                      {{Kind::Rejected, 0.0}, 1.0}, {{Kind::Rejected, 0.0}, 0.1}};
    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    auto klass = [](Kind k) { return k == Kind::NewCell ? 0 : k == Kind::Improved ? 1 : 2; };
    int perms = 0;
    bool ranked_ok = true;
    do {
        std::vector<InsertResult> res;
        std::vector<double> fitness;
        for (int p : perm) {
            res.push_back(pool[static_cast<std::size_t>(p)].first);
            fitness.push_back(pool[static_cast<std::size_t>(p)].second);
        }
        const auto order = improvement_rank(res, fitness);
        for (std::size_t i = 1; i < order.size(); ++i) {
            const auto x = order[i - 1], y = order[i];
            const int kx = klass(res[x].kind), ky = klass(res[y].kind);
            ranked_ok = ranked_ok && kx <= ky;
            if (kx == ky && kx == 0)
                ranked_ok = ranked_ok && fitness[x] >= fitness[y];
            if (kx == ky && kx == 1)
                ranked_ok = ranked_ok && res[x].delta >= res[y].delta;
            if (kx == ky && kx == 2)
                ranked_ok = ranked_ok && x < y;
        }
        ++perms;
    } while (std::next_permutation(perm.begin(), perm.end()));

    report(3, "archive invariants under 1e6 insertions, improvement ranking", monotone && unique && remap && ranked_ok,
           std::to_string(a.size()) + " elites, qd " + fmt(a.qd_score()) + ", " + std::to_string(perms) + " orderings");
}

// 4 and 5. QD algorithms on the synthetic decoder with representation BCs
void illumination()
{
    const fs::path out = fs::temp_directory_path() / "lsi_acceptance_qd";
    fs::remove_all(out);
    ExperimentConfig cfg;
    for (Algorithm alg : {Algorithm::Random, Algorithm::CmaEs, Algorithm::MapElites, Algorithm::MapElitesLine, Algorithm::CmaMe})
        cfg.algorithms.push_back(AlgorithmConfig::preset(alg));
    cfg.trials = tol::qd_trials;
    cfg.evaluations = tol::qd_evaluations;
    cfg.base_seed = 1;
    cfg.output_dir = out.string();

    const auto t0 = Clock::now();
    const SummaryReport summary = run_experiment(cfg);
    const double minutes = seconds_since(t0) / 60.0;

    std::map<std::string, double> coverage;
    std::string detail;
    for (const auto& row : summary.rows) {
        coverage[row.algorithm] = row.coverage.mean;
        detail += row.algorithm + " " + fmt(row.coverage.mean) + ", ";
    }
    const double floor = std::max(coverage["cmaes"], coverage["random"]);
    const bool ordered = summary.failures.empty() && coverage["cmame"] > floor && coverage["me"] > floor && coverage["me-line"] > floor;
    report(4, "QD coverage beats CMA-ES and random", ordered && minutes < tol::qd_minutes, detail + fmt(minutes) + " min");

    int series = 0;
    bool non_decreasing = true;
    for (const auto& entry : fs::directory_iterator(out)) {
        if (entry.path().filename().string().rfind("metrics_", 0) != 0)
            continue;
        std::ifstream in(entry.path());
        const auto rows = read_metrics_csv(in);
        for (std::size_t i = 1; i < rows.size(); ++i)
            non_decreasing = non_decreasing && rows[i].qd_score >= rows[i - 1].qd_score;
        ++series;
    }
    report(5, "logged qd_score series are non-decreasing", non_decreasing && series == 5 * tol::qd_trials,
           std::to_string(series) + " series");
}

// 6. smoothed KL against a direct transcription
void kl()
{
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> size(1, 15), sym(0, 6);
    std::uniform_real_distribution<double> w(0.001, 1.0);
    auto draw = [&] {
        PatternDistribution d;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) {
            std::string key(4, '\0');
            for (auto& ch : key)
                ch = static_cast<char>('a' + sym(rng));
            d[key] += w(rng);
        }
        double t = 0.0;
        for (const auto& kv : d)
            t += kv.second;
        for (auto& kv : d)
            kv.second /= t;
        return d;
    };
    auto oracle = [](const PatternDistribution& p, const PatternDistribution& q, double eps) {
        std::set<std::string> keys;
        for (const auto& kv : p)
            keys.insert(kv.first);
        for (const auto& kv : q)
            keys.insert(kv.first);
        const double n = static_cast<double>(keys.size());
        double total = 0.0;
        for (const auto& k : keys) {
            const double a = (1 - eps) * (p.count(k) ? p.at(k) : 0.0) + eps / n;
            const double b = (1 - eps) * (q.count(k) ? q.at(k) : 0.0) + eps / n;
            total += a * std::log(a / b);
        }
        return total;
    };
    double worst = 0.0;
    bool self_zero = true, non_negative = true;
    for (int i = 0; i < 100; ++i) {
        const auto p = draw(), q = draw();
        const double v = kl_divergence(p, q);
        worst = std::max(worst, std::abs(v - oracle(p, q, 1e-5)));
        non_negative = non_negative && v >= 0.0;
        self_zero = self_zero && kl_divergence(p, p) == 0.0;
    }
    report(6, "KL divergence matches oracle", worst <= tol::kl_oracle && self_zero && non_negative,
           "max deviation " + fmt(worst));
}

// 7. dense fixture and encode/crop round trip
void generator_fixture()
{
    auto w_at = [](int o, int i) { return static_cast<float>(((o * 13 + i * 5) % 17) - 8) / 16.0f; };
    auto b_at = [](int o) { return static_cast<float>((o % 7) - 3) / 8.0f; };
    LayerSpec dense;
    dense.kind = LayerKind::Dense;
    dense.in_features = 32;
    dense.out = {68, 1, 1};
    for (int o = 0; o < 68; ++o) {
        for (int i = 0; i < 32; ++i)
            dense.weight.push_back(w_at(o, i));
        dense.bias.push_back(b_at(o));
    }
    LayerSpec relu;
    relu.kind = LayerKind::Relu;
    const GeneratorSpec spec = GeneratorSpec::create(32, {68, 1, 1}, {dense, relu});
    LatentVector z;
    for (int i = 0; i < 32; ++i)
        z[static_cast<std::size_t>(i)] = std::sin(0.7 * i) * 1.5;
    const Tensor3 y = forward(spec, z);
    double worst = 0.0;
    for (int o = 0; o < 68; ++o) {
        double acc = b_at(o);
        for (int i = 0; i < 32; ++i)
            acc += static_cast<double>(w_at(o, i)) * z[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(y(o, 0, 0) - std::max(acc, 0.0)));
    }

    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> pct(0, 99), any(0, kNumTiles - 1);
    int identical = 0;
    for (int n = 0; n < tol::round_trip_scenes; ++n) {
        TileGrid g = flat_scene();
        for (int c = 0; c < kSceneCols; ++c) {
            if (pct(rng) < 8)
                g(14, c) = g(15, c) = static_cast<std::uint8_t>(tile('-'));
            if (pct(rng) < 12)
                g(13, c) = static_cast<std::uint8_t>(tile(pct(rng) % 2 ? 'g' : 'k'));
            if (pct(rng) < 15)
                g(9, c) = static_cast<std::uint8_t>(tile("S?@o%#"[pct(rng) % 6]));
            if (pct(rng) < 5)
                g(pct(rng) % 8, c) = static_cast<std::uint8_t>(any(rng));
        }
        identical += crop_output(one_hot_encode(g)) == g ? 1 : 0;
    }
    report(7, "dense fixture oracle and one-hot round trip",
           worst <= tol::dense_oracle && identical == tol::round_trip_scenes,
           "max deviation " + fmt(worst) + ", " + std::to_string(identical) + "/" + std::to_string(tol::round_trip_scenes) +
               " identical");
}

// 8. simulator determinism and reference scenes
void simulator()
{
    const TileGrid scene = parse_scene(read_bytes(fs::path(LSI_SOURCE_DIR) / "data/overworld.txt"));
    const PlaythroughTrace first = astar_play(scene);
    bool identical = true;
    for (int i = 1; i < tol::sim_repeats; ++i) {
        const PlaythroughTrace t = astar_play(scene);
        identical = identical && t.actions == first.actions && t.events == first.events && t.completion == first.completion &&
                    t.nodes_expanded == first.nodes_expanded;
    }

    const PlaythroughTrace flat = astar_play(flat_scene());
    const auto flat_bits = classify_events(flat);
    const bool flat_ok = flat.completion == 1.0 && std::none_of(flat_bits.begin(), flat_bits.end(), [](bool b) { return b; });

    TileGrid wall = flat_scene();
    for (int r = 0; r < kSceneRows; ++r)
        wall(r, 20) = static_cast<std::uint8_t>(tile('X'));
    const PlaythroughTrace walled = astar_play(wall);

    TileGrid gap = flat_scene();
    for (int c = 10; c < 13; ++c)
        gap(14, c) = gap(15, c) = static_cast<std::uint8_t>(tile('-'));
    const auto gap_bits = classify_events(astar_play(gap));

    report(8, "simulator determinism and reference scenes",
           identical && flat_ok && walled.completion <= tol::wall_completion && gap_bits[0] && gap_bits[2],
           "flat " + fmt(flat.completion) + ", wall " + fmt(walled.completion) + ", gap jump/long-jump " +
               std::to_string(gap_bits[0]) + "/" + std::to_string(gap_bits[2]));
}

// 9. two CLI runs of one config are byte-identical
void reproducibility()
{
    const fs::path root = fs::temp_directory_path() / "lsi_acceptance_repro";
    fs::remove_all(root);
    const std::string config = std::string(LSI_SOURCE_DIR) + "/configs/smoke.ini";
    int status = 0;
    for (const char* run : {"a", "b"}) {
        const std::string cmd = "LSI_OUTPUT_ROOT=" + (root / run).string() + " " + LSI_CLI + " run " + config + " > /dev/null";
        status |= std::system(cmd.c_str());
    }
    int files = 0, same = 0;
    if (fs::exists(root / "a"))
        for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
            const auto name = entry.path().filename().string();
            if (!entry.is_regular_file() || (name.rfind("archive_", 0) != 0 && name.rfind("metrics_", 0) != 0))
                continue;
            ++files;
            const fs::path twin = root / "b" / fs::relative(entry.path(), root / "a");
            same += fs::exists(twin) && read_bytes(entry.path()) == read_bytes(twin) ? 1 : 0;
        }
    report(9, "repeated runs give byte-identical CSVs", status == 0 && files > 0 && same == files,
           std::to_string(same) + "/" + std::to_string(files) + " files identical");
}

} // namespace

int main()
{
    try {
        sphere();
        covariance_health();
        archive_laws();
        kl();
        generator_fixture();
        simulator();
        reproducibility();
        illumination();
    } catch (const std::exception& e) {
        std::cout << "FAIL  aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
