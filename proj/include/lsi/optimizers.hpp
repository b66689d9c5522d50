#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lsi/behavior_metrics.hpp"
#include "lsi/cma_es.hpp"
#include "lsi/generator.hpp"
#include "lsi/qd_core.hpp"
#include "lsi/random.hpp"

namespace lsi {

enum class Algorithm { Random, CmaEs, MapElites, MapElitesLine, CmaMe };

inline std::string_view to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::Random:
        return "random";
    case Algorithm::CmaEs:
        return "cmaes";
    case Algorithm::MapElites:
        return "me";
    case Algorithm::MapElitesLine:
        return "me-line";
    case Algorithm::CmaMe:
        return "cmame";
    }
    return "?";
}

inline std::optional<Algorithm> algorithm_from_string(std::string_view s)
{
    for (Algorithm a : {Algorithm::Random, Algorithm::CmaEs, Algorithm::MapElites, Algorithm::MapElitesLine, Algorithm::CmaMe})
        if (to_string(a) == s)
            return a;
    return std::nullopt;
}

struct AlgorithmConfig {
    Algorithm algorithm = Algorithm::Random;
    int lambda = 17;
    double sigma = 0.5;
    double sigma1 = 0.02; // me-line isotropic
    double sigma2 = 0.2;  // me-line directional
    int emitters = 5;
    int initial_population = 100;
    int batch_size = 100;        // me / me-line logging cadence
    int restart_patience = 5;    // cmame: stagnant generations before an emitter restarts
    int random_log_interval = 100;
    std::size_t budget = 10000;
    std::uint64_t seed = 0;

    /// Tuned settings: cmaes lambda 17 sigma 0.5; me sigma 0.2; me-line sigma1 0.02 sigma2 0.2;
    /// cmame 5 emitters lambda 37 sigma 0.2; initial population 100.
    static AlgorithmConfig preset(Algorithm a, std::size_t budget = 10000, std::uint64_t seed = 0)
    {
        AlgorithmConfig c;
        c.algorithm = a;
        c.budget = budget;
        c.seed = seed;
        switch (a) {
        case Algorithm::CmaEs:
            c.lambda = 17;
            c.sigma = 0.5;
            break;
        case Algorithm::CmaMe:
            c.lambda = 37;
            c.sigma = 0.2;
            c.emitters = 5;
            break;
        case Algorithm::MapElites:
        case Algorithm::MapElitesLine:
        case Algorithm::Random:
            c.sigma = 0.2;
            break;
        }
        return c;
    }
};

inline LatentVector random_sample(Rng& rng)
{
    LatentVector z;
    for (auto& v : z.values)
        v = rng.gaussian();
    return z;
}

inline LatentVector me_variation(const LatentVector& parent, double sigma, Rng& rng)
{
    LatentVector child = parent;
    for (auto& v : child.values)
        v += sigma * rng.gaussian();
    return child;
}

/// Iso+LineDD: x + sigma1 * N(0, I) + sigma2 * N(0, 1) * (y - x).
inline LatentVector iso_line_dd(const LatentVector& x, const LatentVector& y, double sigma1, double sigma2, Rng& rng)
{
    LatentVector child = x;
    for (auto& v : child.values)
        v += sigma1 * rng.gaussian();
    const double line = sigma2 * rng.gaussian();
    for (std::size_t i = 0; i < child.values.size(); ++i)
        child[i] += line * (y[i] - x[i]);
    return child;
}

/// Improvement-emitter ordering of sample indices: new cells (by fitness, best first), then
/// improvements (by fitness gain, largest first), then rejections in sample order.
inline std::vector<std::size_t> improvement_rank(const std::vector<InsertResult>& results, const std::vector<double>& fitness)
{
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto klass = [&](std::size_t i) {
        switch (results[i].kind) {
        case InsertResult::Kind::NewCell:
            return 0;
        case InsertResult::Kind::Improved:
            return 1;
        case InsertResult::Kind::Rejected:
            return 2;
        }
        return 2;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const int ka = klass(a), kb = klass(b);
        if (ka != kb)
            return ka < kb;
        if (ka == 0)
            return fitness[a] > fitness[b];
        if (ka == 1)
            return results[a].delta > results[b].delta;
        return false;
    });
    return order;
}

struct MetricsRow {
    std::size_t evaluations = 0;
    double coverage = 0.0;
    double qd_score = 0.0;
    double valid_over_all = 0.0;
    double valid_over_found = 0.0;
};

using MetricsLog = std::vector<MetricsRow>;

struct EvaluatedScene {
    Evaluation evaluation;
    std::uint64_t grid_hash = 0;
};

/// Decodes a latent vector and scores the resulting scene.
class SceneEvaluator {
public:
    SceneEvaluator(SceneDecoder decoder, SceneScorer scorer) : _decoder(std::move(decoder)), _scorer(std::move(scorer)) {}

    EvaluatedScene operator()(const LatentVector& z) const
    {
        const TileGrid grid = _decoder(z);
        return {_scorer(grid), grid_hash(grid)};
    }

    const SceneDecoder& decoder() const { return _decoder; }
    const SceneScorer& scorer() const { return _scorer; }

private:
    SceneDecoder _decoder;
    SceneScorer _scorer;
};

namespace detail {

    inline Eigen::VectorXd to_eigen(const LatentVector& z) { return Eigen::Map<const Eigen::VectorXd>(z.values.data(), kLatentDim); }

    inline LatentVector from_eigen(const Eigen::VectorXd& v)
    {
        LatentVector z;
        for (int i = 0; i < kLatentDim; ++i)
            z[static_cast<std::size_t>(i)] = v[i];
        return z;
    }

    template <typename Evaluator>
    class Trial {
    public:
        Trial(const AlgorithmConfig& cfg, Evaluator& eval, Archive& archive)
            : cfg(cfg), rng(cfg.seed), _eval(eval), _archive(archive)
        {
        }

        std::size_t remaining() const { return cfg.budget - _count; }
        std::size_t count() const { return _count; }
        Archive& archive() { return _archive; }

        std::pair<InsertResult, double> evaluate(const LatentVector& z)
        {
            EvaluatedScene scene = _eval(z);
            ++_count;
            const double fitness = scene.evaluation.fitness;
            return {_archive.add(z, scene.grid_hash, std::move(scene.evaluation), _count), fitness};
        }

        void log()
        {
            if (!_log.empty() && _log.back().evaluations == _count)
                return;
            const auto [all, found] = _archive.valid_stats();
            _log.push_back({_count, _archive.coverage(), _archive.qd_score(), all, found});
        }

        MetricsLog take_log() { return std::move(_log); }

        const AlgorithmConfig& cfg;
        Rng rng;

    private:
        Evaluator& _eval;
        Archive& _archive;
        std::size_t _count = 0;
        MetricsLog _log;
    };

    template <typename Evaluator>
    void run_random(Trial<Evaluator>& t)
    {
        const auto every = static_cast<std::size_t>(std::max(1, t.cfg.random_log_interval));
        while (t.remaining() > 0) {
            t.evaluate(random_sample(t.rng));
            if (t.count() % every == 0)
                t.log();
        }
    }

    template <typename Evaluator>
    void run_map_elites(Trial<Evaluator>& t, bool line)
    {
        const auto every = static_cast<std::size_t>(std::max(1, t.cfg.batch_size));
        while (t.remaining() > 0) {
            LatentVector child;
            if (t.count() < static_cast<std::size_t>(t.cfg.initial_population) || t.archive().empty()) {
                child = random_sample(t.rng);
            } else if (line) {
                const LatentVector x = t.archive().random_elite(t.rng).latent;
                const LatentVector y = t.archive().random_elite(t.rng).latent;
                child = iso_line_dd(x, y, t.cfg.sigma1, t.cfg.sigma2, t.rng);
            } else {
                child = me_variation(t.archive().random_elite(t.rng).latent, t.cfg.sigma, t.rng);
            }
            t.evaluate(child);
            if (t.count() % every == 0)
                t.log();
        }
    }

    template <typename Evaluator>
    std::vector<Eigen::VectorXd> ask_or_restart(Trial<Evaluator>& t, EmitterState& e, const Eigen::VectorXd& fallback)
    {
        try {
            return cma_ask(e, t.rng);
        } catch (const CovarianceDegenerate&) {
            e.restart(fallback);
            return cma_ask(e, t.rng);
        }
    }

    template <typename Evaluator>
    void run_cmaes(Trial<Evaluator>& t)
    {
        EmitterState es = EmitterState::create(Eigen::VectorXd::Zero(kLatentDim), t.cfg.sigma, t.cfg.lambda);
        while (t.remaining() > 0) {
            const auto xs = ask_or_restart(t, es, es.mean);
            const std::size_t n = std::min(xs.size(), t.remaining());
            std::vector<std::pair<Eigen::VectorXd, double>> ranked;
            for (std::size_t i = 0; i < n; ++i)
                ranked.emplace_back(xs[i], t.evaluate(from_eigen(xs[i])).second);
            if (n == xs.size()) {
                try {
                    cma_tell(es, ranked);
                } catch (const NonFiniteUpdate&) {
                    es.restart(es.mean.allFinite() ? Eigen::VectorXd(es.mean) : Eigen::VectorXd::Zero(kLatentDim));
                }
            }
            t.log();
        }
    }

    template <typename Evaluator>
    void run_cmame(Trial<Evaluator>& t)
    {
        std::vector<EmitterState> emitters;
        std::vector<int> stagnant(static_cast<std::size_t>(t.cfg.emitters), 0);
        for (int i = 0; i < t.cfg.emitters; ++i)
            emitters.push_back(EmitterState::create(Eigen::VectorXd::Zero(kLatentDim), t.cfg.sigma, t.cfg.lambda));

        auto restart_point = [&t]() -> Eigen::VectorXd {
            if (t.archive().empty())
                return Eigen::VectorXd::Zero(kLatentDim);
            return to_eigen(t.archive().random_elite(t.rng).latent);
        };

        while (t.remaining() > 0) {
            for (std::size_t ei = 0; ei < emitters.size() && t.remaining() > 0; ++ei) {
                EmitterState& e = emitters[ei];
                std::vector<Eigen::VectorXd> xs;
                try {
                    xs = cma_ask(e, t.rng);
                } catch (const CovarianceDegenerate&) {
                    e.restart(restart_point());
                    stagnant[ei] = 0;
                    xs = cma_ask(e, t.rng);
                }
                const std::size_t n = std::min(xs.size(), t.remaining());
                std::vector<InsertResult> results;
                std::vector<double> fitness;
                for (std::size_t i = 0; i < n; ++i) {
                    auto [res, fit] = t.evaluate(from_eigen(xs[i]));
                    results.push_back(res);
                    fitness.push_back(fit);
                }
                if (n < xs.size())
                    break;

                const bool progressed = std::any_of(results.begin(), results.end(), [](const InsertResult& r) { return r.accepted(); });
                const auto order = improvement_rank(results, fitness);
                std::vector<std::pair<Eigen::VectorXd, double>> ranked;
                for (std::size_t pos = 0; pos < order.size(); ++pos)
                    ranked.emplace_back(xs[order[pos]], static_cast<double>(order.size() - pos));
                try {
                    cma_tell(e, ranked);
                } catch (const NonFiniteUpdate&) {
                    e.restart(restart_point());
                    stagnant[ei] = 0;
                    continue;
                }
                stagnant[ei] = progressed ? 0 : stagnant[ei] + 1;
                if (stagnant[ei] >= t.cfg.restart_patience) {
                    e.restart(restart_point());
                    stagnant[ei] = 0;
                }
            }
            t.log();
        }
    }

} // namespace detail

/// Runs one algorithm to its evaluation budget, inserting every evaluation into `archive`.
/// `evaluator` maps a LatentVector to an EvaluatedScene.
template <typename Evaluator>
MetricsLog run(const AlgorithmConfig& cfg, Evaluator&& evaluator, Archive& archive)
{
    detail::Trial<std::remove_reference_t<Evaluator>> trial(cfg, evaluator, archive);
    if (cfg.budget == 0)
        return {};
    switch (cfg.algorithm) {
    case Algorithm::Random:
        detail::run_random(trial);
        break;
    case Algorithm::MapElites:
        detail::run_map_elites(trial, false);
        break;
    case Algorithm::MapElitesLine:
        detail::run_map_elites(trial, true);
        break;
    case Algorithm::CmaEs:
        detail::run_cmaes(trial);
        break;
    case Algorithm::CmaMe:
        detail::run_cmame(trial);
        break;
    }
    trial.log();
    return trial.take_log();
}

} // namespace lsi
