#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsi/error.hpp"
#include "lsi/level_model.hpp"
#include "lsi/platformer_sim.hpp"

namespace lsi {

enum class BCFamily { Representation, Agent, KL };

inline std::string_view to_string(BCFamily f)
{
    switch (f) {
    case BCFamily::Representation:
        return "representation";
    case BCFamily::Agent:
        return "agent";
    case BCFamily::KL:
        return "kl";
    }
    return "?";
}

inline std::optional<BCFamily> bc_family_from_string(std::string_view s)
{
    if (s == "representation")
        return BCFamily::Representation;
    if (s == "agent")
        return BCFamily::Agent;
    if (s == "kl")
        return BCFamily::KL;
    return std::nullopt;
}

/// Probability of every w x w tile pattern. Keys hold the w*w alphabet indices row-major.
using PatternDistribution = std::map<std::string, double>;

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-empty, non-enemy tiles strictly above `threshold_row` (row 0 is the top).
inline int sky_tile_count(const TileGrid& grid, int threshold_row = 11, const TileAlphabet& alphabet = default_alphabet())
{
    int n = 0;
    for (int r = 0; r < threshold_row && r < kSceneRows; ++r)
        for (int c = 0; c < kSceneCols; ++c) {
            const TileClass t = alphabet.tile_class(grid(r, c));
            if (t != TileClass::Empty && !is_enemy(t))
                ++n;
        }
    return n;
}

inline int enemy_count(const TileGrid& grid, const TileAlphabet& alphabet = default_alphabet())
{
    int n = 0;
    for (auto v : grid.cells)
        n += is_enemy(alphabet.tile_class(v)) ? 1 : 0;
    return n;
}

/// Frequencies of every fully-inside w x w window at stride 1.
inline PatternDistribution pattern_distribution(const TileGrid& grid, int w = 2)
{
    if (w < 1 || w > kSceneRows)
        throw ConfigError("pattern window size must be in [1, 16]");
    std::map<std::string, long> counts;
    std::string key(static_cast<std::size_t>(w * w), '\0');
    long total = 0;
    for (int r = 0; r + w <= kSceneRows; ++r)
        for (int c = 0; c + w <= kSceneCols; ++c) {
            for (int dr = 0; dr < w; ++dr)
                for (int dc = 0; dc < w; ++dc)
                    key[static_cast<std::size_t>(dr * w + dc)] = static_cast<char>(grid(r + dr, c + dc));
            ++counts[key];
            ++total;
        }
    PatternDistribution p;
    for (const auto& [k, n] : counts)
        p.emplace_hint(p.end(), k, static_cast<double>(n) / static_cast<double>(total));
    return p;
}

/// KL(p || q) after mixing both with the uniform distribution over their union support:
/// x' = (1 - eps) x + eps / |U|.
inline double kl_divergence(const PatternDistribution& p, const PatternDistribution& q, double eps = 1e-5)
{
    std::size_t support = 0;
    {
        auto a = p.begin();
        auto b = q.begin();
        while (a != p.end() || b != q.end()) {
            if (b == q.end() || (a != p.end() && a->first < b->first))
                ++a;
            else if (a == p.end() || b->first < a->first)
                ++b;
            else {
                ++a;
                ++b;
            }
            ++support;
        }
    }
    if (support == 0)
        return 0.0;
    const double u = eps / static_cast<double>(support);
    double sum = 0.0;
    auto term = [&](double px, double qx) {
        const double ps = (1.0 - eps) * px + u;
        const double qs = (1.0 - eps) * qx + u;
        sum += ps * std::log(ps / qs);
    };
    auto a = p.begin();
    auto b = q.begin();
    while (a != p.end() || b != q.end()) {
        if (b == q.end() || (a != p.end() && a->first < b->first)) {
            term(a->second, 0.0);
            ++a;
        } else if (a == p.end() || b->first < a->first) {
            term(0.0, b->second);
            ++b;
        } else {
            term(a->second, b->second);
            ++a;
            ++b;
        }
    }
    return std::max(sum, 0.0);
}

struct BCConfig {
    BCFamily family = BCFamily::Representation;
    int sky_row = 11;

    // kl family: two ground-truth scenes
    std::vector<TileGrid> truths;
    int window = 2;
    double epsilon = 1e-5;

    BCConfig() = default;
    explicit BCConfig(BCFamily f) : family(f) {}

    std::size_t dimensions() const { return family == BCFamily::Agent ? kNumEvents : 2; }

    void validate() const
    {
        if (sky_row < 0 || sky_row >= kSceneRows)
            throw ConfigError("sky row threshold must be in [0, 16)");
        if (family == BCFamily::KL) {
            if (truths.size() != 2)
                throw ConfigError("kl family needs exactly two ground-truth scenes");
            if (window < 1 || !(epsilon > 0.0))
                throw ConfigError("kl family needs window >= 1 and epsilon > 0");
        }
    }
};

struct Evaluation {
    double fitness = 0.0;
    std::vector<double> bc;
    std::uint8_t events = 0;
};

/// Scores scenes under one BC family. Ground-truth pattern distributions are computed once.
class SceneScorer {
public:
    SceneScorer(BCConfig cfg, AStarOptions sim = {}, const TileAlphabet& alphabet = default_alphabet())
        : _cfg(std::move(cfg)), _sim(sim), _alphabet(alphabet)
    {
        _cfg.validate();
        for (const auto& t : _cfg.truths)
            _truths.push_back(pattern_distribution(t, _cfg.window));
    }

    const BCConfig& config() const { return _cfg; }

    Evaluation operator()(const TileGrid& grid) const
    {
        Evaluation ev;
        try {
            const PlaythroughTrace trace = astar_play(make_level(grid, _alphabet), _sim);
            ev.fitness = trace.completion;
            ev.events = trace.events;
        } catch (const NoSpawnSurface&) {
            ev.fitness = 0.0;
        }
        switch (_cfg.family) {
        case BCFamily::Representation:
            ev.bc = {static_cast<double>(sky_tile_count(grid, _cfg.sky_row, _alphabet)),
                     static_cast<double>(enemy_count(grid, _alphabet))};
            break;
        case BCFamily::Agent:
            for (int i = 0; i < kNumEvents; ++i)
                ev.bc.push_back(((ev.events >> i) & 1u) ? 1.0 : 0.0);
            break;
        case BCFamily::KL: {
            const PatternDistribution p = pattern_distribution(grid, _cfg.window);
            ev.bc = {kl_divergence(p, _truths[0], _cfg.epsilon), kl_divergence(p, _truths[1], _cfg.epsilon)};
            break;
        }
        }
        return ev;
    }

private:
    BCConfig _cfg;
    AStarOptions _sim;
    TileAlphabet _alphabet;
    std::vector<PatternDistribution> _truths;
};

inline Evaluation evaluate(const TileGrid& grid, const BCConfig& cfg, AStarOptions sim = {},
                           const TileAlphabet& alphabet = default_alphabet())
{
    return SceneScorer(cfg, sim, alphabet)(grid);
}

} // namespace lsi
