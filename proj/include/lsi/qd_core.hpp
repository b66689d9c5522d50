#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lsi/behavior_metrics.hpp"
#include "lsi/csv.hpp"
#include "lsi/error.hpp"
#include "lsi/generator.hpp"

namespace lsi {

/// One behavior axis: [lower, upper] split into `bins` uniform cells.
/// Integer axes map a value k to cell k - lower (the representation preset).
struct Dimension {
    double lower = 0.0;
    double upper = 1.0;
    int bins = 1;
    bool integer = false;
};

class MapConfigError : public Error {
public:
    using Error::Error;
};

struct MapConfig {
    std::vector<Dimension> dims;
    std::string family;

    std::size_t total_cells() const
    {
        std::size_t n = 1;
        for (const auto& d : dims)
            n *= static_cast<std::size_t>(d.bins);
        return n;
    }

    void validate() const
    {
        if (dims.empty())
            throw MapConfigError("map needs at least one dimension");
        for (const auto& d : dims) {
            if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper))
                throw MapConfigError("map bounds must be finite with lower < upper");
            if (d.bins < 1)
                throw MapConfigError("map bins must be >= 1");
        }
    }

    static MapConfig representation()
    {
        return {{{0.0, 150.0, 151, true}, {0.0, 25.0, 26, true}}, "representation"};
    }

    static MapConfig agent()
    {
        return {std::vector<Dimension>(kNumEvents, Dimension{0.0, 1.0, 2, false}), "agent"};
    }

    static MapConfig kl() { return {{{0.0, 4.5, 60, false}, {0.0, 4.5, 60, false}}, "kl"}; }

    static MapConfig preset(BCFamily f)
    {
        switch (f) {
        case BCFamily::Representation:
            return representation();
        case BCFamily::Agent:
            return agent();
        case BCFamily::KL:
            return kl();
        }
        return representation();
    }

    /// Preset name, or explicit axes "lo:hi:bins[:int],lo:hi:bins,...".
    static MapConfig parse(const std::string& text)
    {
        if (text == "representation")
            return representation();
        if (text == "agent")
            return agent();
        if (text == "kl")
            return kl();
        MapConfig cfg;
        cfg.family = "custom";
        for (auto axis : csv::split(text, ',')) {
            auto parts = csv::split(axis, ':');
            if (parts.size() != 3 && !(parts.size() == 4 && parts[3] == "int"))
                throw MapConfigError("bad map axis '" + std::string(axis) + "', expected lo:hi:bins[:int]");
            cfg.dims.push_back({csv::to_double(parts[0]), csv::to_double(parts[1]),
                                static_cast<int>(csv::to_int(parts[2])), parts.size() == 4});
        }
        cfg.validate();
        return cfg;
    }
};

struct CellIndex {
    std::vector<int> coords;
    std::size_t flat = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t got, std::size_t want)
        : Error("behavior vector has " + std::to_string(got) + " entries, map has " + std::to_string(want) + " dimensions")
    {
    }
};

inline CellIndex cell_from_coords(const MapConfig& cfg, std::vector<int> coords)
{
    CellIndex cell{std::move(coords), 0};
    for (std::size_t i = 0; i < cfg.dims.size(); ++i)
        cell.flat = cell.flat * static_cast<std::size_t>(cfg.dims[i].bins) + static_cast<std::size_t>(cell.coords[i]);
    return cell;
}

/// Per axis: clamp(floor((bc - lo) / (hi - lo) * bins), 0, bins - 1); integer axes use
/// clamp(round(bc) - lo, 0, bins - 1).
inline CellIndex bc_to_cell(const MapConfig& cfg, const std::vector<double>& bc)
{
    if (bc.size() != cfg.dims.size())
        throw DimensionMismatch(bc.size(), cfg.dims.size());
    std::vector<int> coords(bc.size());
    for (std::size_t i = 0; i < bc.size(); ++i) {
        const Dimension& d = cfg.dims[i];
        double raw = d.integer ? std::round(bc[i]) - d.lower : std::floor((bc[i] - d.lower) / (d.upper - d.lower) * d.bins);
        if (std::isnan(raw))
            raw = 0.0;
        coords[i] = static_cast<int>(std::clamp(raw, 0.0, static_cast<double>(d.bins - 1)));
    }
    return cell_from_coords(cfg, std::move(coords));
}

struct Elite {
    LatentVector latent;
    std::uint64_t grid_hash = 0;
    Evaluation evaluation;
    CellIndex cell;
    std::size_t discovered_at = 0;
};

struct InsertResult {
    enum class Kind { NewCell, Improved, Rejected };
    Kind kind = Kind::Rejected;
    double delta = 0.0; // fitness gain for Improved

    bool accepted() const { return kind != Kind::Rejected; }
};

class EmptyArchive : public Error {
public:
    EmptyArchive() : Error("archive is empty") {}
};

/// Behavior-space grid with at most one elite (the fittest seen) per cell.
class Archive {
public:
    explicit Archive(MapConfig cfg) : _cfg(std::move(cfg)) { _cfg.validate(); }

    const MapConfig& config() const { return _cfg; }
    std::size_t size() const { return _elites.size(); }
    bool empty() const { return _elites.empty(); }
    std::size_t evaluations() const { return _evaluations; }
    std::size_t insertions() const { return _insertions; }

    /// Elites keyed by flat cell index.
    const std::map<std::size_t, Elite>& elites() const { return _elites; }

    const Elite* find(std::size_t flat) const
    {
        auto it = _elites.find(flat);
        return it == _elites.end() ? nullptr : &it->second;
    }

    /// Stores the candidate when its cell is empty or it is strictly fitter; ties keep the incumbent.
    InsertResult try_insert(Elite candidate)
    {
        ++_evaluations;
        auto it = _elites.find(candidate.cell.flat);
        if (it == _elites.end()) {
            _qd_score += candidate.evaluation.fitness;
            if (candidate.evaluation.fitness == 1.0)
                ++_valid;
            _order.push_back(candidate.cell.flat);
            _elites.emplace(candidate.cell.flat, std::move(candidate));
            ++_insertions;
            return {InsertResult::Kind::NewCell, 0.0};
        }
        const double incumbent = it->second.evaluation.fitness;
        const double challenger = candidate.evaluation.fitness;
        if (!(challenger > incumbent))
            return {InsertResult::Kind::Rejected, 0.0};
        const double delta = challenger - incumbent;
        _qd_score += delta;
        if (challenger == 1.0 && incumbent != 1.0)
            ++_valid;
        it->second = std::move(candidate);
        ++_insertions;
        return {InsertResult::Kind::Improved, delta};
    }

    /// Builds the elite record for an evaluated latent and inserts it.
    InsertResult add(const LatentVector& latent, std::uint64_t grid_hash, Evaluation ev, std::size_t discovered_at)
    {
        CellIndex cell = bc_to_cell(_cfg, ev.bc);
        return try_insert(Elite{latent, grid_hash, std::move(ev), std::move(cell), discovered_at});
    }

    double coverage() const { return static_cast<double>(_elites.size()) / static_cast<double>(_cfg.total_cells()); }

    /// Sum of elite fitness, accumulated from non-negative gains.
    double qd_score() const { return _qd_score; }

    std::size_t valid_count() const { return _valid; }

    /// (valid / map size, valid / filled); the second is 0 for an empty archive.
    std::pair<double, double> valid_stats() const
    {
        const double v = static_cast<double>(_valid);
        return {v / static_cast<double>(_cfg.total_cells()), _elites.empty() ? 0.0 : v / static_cast<double>(_elites.size())};
    }

    template <typename URBG>
    const Elite& random_elite(URBG& rng) const
    {
        if (_order.empty())
            throw EmptyArchive();
        std::uniform_int_distribution<std::size_t> pick(0, _order.size() - 1);
        return _elites.at(_order[pick(rng)]);
    }

private:
    MapConfig _cfg;
    std::map<std::size_t, Elite> _elites;
    std::vector<std::size_t> _order; // flat indices in discovery order
    std::size_t _evaluations = 0;
    std::size_t _insertions = 0;
    std::size_t _valid = 0;
    double _qd_score = 0.0;
};

inline double coverage(const Archive& a) { return a.coverage(); }
inline double qd_score(const Archive& a) { return a.qd_score(); }
inline std::pair<double, double> valid_stats(const Archive& a) { return a.valid_stats(); }

/// One row of an exported archive.
struct ArchiveRecord {
    std::vector<int> cell;
    std::vector<double> bc;
    double fitness = 0.0;
    LatentVector latent;
    std::size_t discovered_at = 0;
};

/// Header: cell_0.., bc_0.., fitness, latent_0..latent_31, discovered_at. Rows in cell order.
inline void write_archive_csv(std::ostream& out, const Archive& archive)
{
    const std::size_t dims = archive.config().dims.size();
    for (std::size_t i = 0; i < dims; ++i)
        out << "cell_" << i << ',';
    for (std::size_t i = 0; i < dims; ++i)
        out << "bc_" << i << ',';
    out << "fitness,";
    for (int i = 0; i < kLatentDim; ++i)
        out << "latent_" << i << ',';
    out << "discovered_at\n";
    for (const auto& [flat, e] : archive.elites()) {
        for (int c : e.cell.coords)
            out << c << ',';
        for (double b : e.evaluation.bc)
            out << csv::format(b) << ',';
        out << csv::format(e.evaluation.fitness) << ',';
        for (double v : e.latent.values)
            out << csv::format(v) << ',';
        out << e.discovered_at << '\n';
    }
}

inline std::vector<ArchiveRecord> read_archive_csv(std::istream& in, std::size_t* dims_out = nullptr)
{
    std::string line;
    if (!std::getline(in, line))
        throw csv::CsvError("archive CSV is empty");
    const auto header = csv::split(line);
    std::size_t dims = 0;
    while (dims < header.size() && header[dims].rfind("cell_", 0) == 0)
        ++dims;
    if (dims == 0 || header.size() != 2 * dims + 1 + kLatentDim + 1)
        throw csv::CsvError("archive CSV header does not match the archive layout");
    if (dims_out)
        *dims_out = dims;

    std::vector<ArchiveRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto f = csv::split(line);
        if (f.size() != header.size())
            throw csv::CsvError("archive CSV row has " + std::to_string(f.size()) + " fields");
        ArchiveRecord r;
        std::size_t k = 0;
        for (std::size_t i = 0; i < dims; ++i)
            r.cell.push_back(static_cast<int>(csv::to_int(f[k++])));
        for (std::size_t i = 0; i < dims; ++i)
            r.bc.push_back(csv::to_double(f[k++]));
        r.fitness = csv::to_double(f[k++]);
        for (int i = 0; i < kLatentDim; ++i)
            r.latent[static_cast<std::size_t>(i)] = csv::to_double(f[k++]);
        r.discovered_at = static_cast<std::size_t>(csv::to_int(f[k++]));
        rows.push_back(std::move(r));
    }
    return rows;
}

class NotTwoDimensional : public Error {
public:
    NotTwoDimensional() : Error("heatmaps need a two-dimensional archive") {}
};

inline constexpr double kEmptyCell = -1.0;

/// Fitness per cell of a 2-D map, indexed [dim0][dim1]; empty cells hold -1.
inline std::vector<std::vector<double>> heatmap_grid(const MapConfig& cfg, const std::vector<ArchiveRecord>& rows)
{
    if (cfg.dims.size() != 2)
        throw NotTwoDimensional();
    std::vector<std::vector<double>> grid(static_cast<std::size_t>(cfg.dims[0].bins),
                                          std::vector<double>(static_cast<std::size_t>(cfg.dims[1].bins), kEmptyCell));
    for (const auto& r : rows) {
        if (r.cell.size() != 2)
            throw NotTwoDimensional();
        if (r.cell[0] < 0 || r.cell[0] >= cfg.dims[0].bins || r.cell[1] < 0 || r.cell[1] >= cfg.dims[1].bins)
            throw MapConfigError("archive cell outside the map");
        grid[static_cast<std::size_t>(r.cell[0])][static_cast<std::size_t>(r.cell[1])] = r.fitness;
    }
    return grid;
}

inline void write_heatmap_csv(std::ostream& out, const std::vector<std::vector<double>>& grid)
{
    for (const auto& row : grid) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j)
                out << ',';
            out << csv::format(row[j]);
        }
        out << '\n';
    }
}

/// Binary PPM: x is dim0, y is dim1 with the largest bin on top. Empty cells are black,
/// fitness 0 is dark blue and fitness 1 is bright yellow.
inline void write_heatmap_ppm(std::ostream& out, const std::vector<std::vector<double>>& grid)
{
    const std::size_t w = grid.size();
    const std::size_t h = w ? grid[0].size() : 0;
    out << "P6\n" << w << ' ' << h << "\n255\n";
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double f = grid[x][h - 1 - y];
            unsigned char px[3] = {0, 0, 0};
            if (f != kEmptyCell) {
                const double t = std::clamp(f, 0.0, 1.0);
                px[0] = static_cast<unsigned char>(std::lround(30 + 225 * t));
                px[1] = static_cast<unsigned char>(std::lround(20 + 215 * t));
                px[2] = static_cast<unsigned char>(std::lround(90 - 60 * t));
            }
            out.write(reinterpret_cast<const char*>(px), 3);
        }
}

} // namespace lsi
