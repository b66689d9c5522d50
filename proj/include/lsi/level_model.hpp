#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsi/error.hpp"

namespace lsi {

inline constexpr int kSceneRows = 16;
inline constexpr int kSceneCols = 56;
inline constexpr int kNumTiles = 17;
inline constexpr int kCanvasSize = 64;

enum class TileClass : std::uint8_t {
    Empty,
    Solid,
    Breakable,
    QuestionCoin,
    QuestionMushroom,
    Coin,
    EnemyGoomba,
    EnemyKoopa,
    EnemyWinged,
    PipePart,
    BulletHead,
    Platform,
};

inline constexpr std::array<std::pair<TileClass, std::string_view>, 12> kTileClassNames{{
    {TileClass::Empty, "empty"},
    {TileClass::Solid, "solid"},
    {TileClass::Breakable, "breakable"},
    {TileClass::QuestionCoin, "question-coin"},
    {TileClass::QuestionMushroom, "question-mushroom"},
    {TileClass::Coin, "coin"},
    {TileClass::EnemyGoomba, "enemy-goomba"},
    {TileClass::EnemyKoopa, "enemy-koopa"},
    {TileClass::EnemyWinged, "enemy-winged"},
    {TileClass::PipePart, "pipe-part"},
    {TileClass::BulletHead, "bullet-head"},
    {TileClass::Platform, "platform"},
}};

inline std::string_view to_string(TileClass c)
{
    for (const auto& [cls, name] : kTileClassNames)
        if (cls == c)
            return name;
    return "?";
}

inline std::optional<TileClass> tile_class_from_string(std::string_view name)
{
    for (const auto& [cls, n] : kTileClassNames)
        if (n == name)
            return cls;
    return std::nullopt;
}

/// Tiles the agent and walking enemies cannot pass through.
constexpr bool is_solid(TileClass c)
{
    switch (c) {
    case TileClass::Solid:
    case TileClass::Breakable:
    case TileClass::QuestionCoin:
    case TileClass::QuestionMushroom:
    case TileClass::PipePart:
    case TileClass::BulletHead:
    case TileClass::Platform:
        return true;
    default:
        return false;
    }
}

constexpr bool is_enemy(TileClass c)
{
    return c == TileClass::EnemyGoomba || c == TileClass::EnemyKoopa || c == TileClass::EnemyWinged;
}

class AlphabetError : public Error {
public:
    using Error::Error;
};

/// Ordered 17-symbol tile alphabet. A symbol's channel index is its position.
class TileAlphabet {
public:
    using Entry = std::pair<char, TileClass>;

    explicit TileAlphabet(std::vector<Entry> symbols) : _symbols(std::move(symbols))
    {
        if (_symbols.size() != kNumTiles)
            throw AlphabetError("alphabet must have exactly 17 symbols, got " + std::to_string(_symbols.size()));
        _lookup.fill(-1);
        for (std::size_t i = 0; i < _symbols.size(); ++i) {
            auto ch = static_cast<unsigned char>(_symbols[i].first);
            if (_lookup[ch] >= 0)
                throw AlphabetError(std::string("duplicate alphabet symbol '") + _symbols[i].first + "'");
            _lookup[ch] = static_cast<int>(i);
        }
    }

    std::optional<int> index_of(char symbol) const
    {
        int idx = _lookup[static_cast<unsigned char>(symbol)];
        if (idx < 0)
            return std::nullopt;
        return idx;
    }

    char symbol(int index) const { return _symbols.at(static_cast<std::size_t>(index)).first; }
    TileClass tile_class(int index) const { return _symbols[static_cast<std::size_t>(index)].second; }

    /// Lowest index whose class is `c`; throws when the alphabet has no such class.
    int first_of(TileClass c) const
    {
        for (std::size_t i = 0; i < _symbols.size(); ++i)
            if (_symbols[i].second == c)
                return static_cast<int>(i);
        throw AlphabetError("alphabet has no tile of class " + std::string(to_string(c)));
    }

    const std::vector<Entry>& symbols() const { return _symbols; }

private:
    std::vector<Entry> _symbols;
    std::array<int, 256> _lookup{};
};

inline const TileAlphabet& default_alphabet()
{
    static const TileAlphabet alphabet({
        {'-', TileClass::Empty},
        {'X', TileClass::Solid},
        {'#', TileClass::Solid},
        {'S', TileClass::Breakable},
        {'?', TileClass::QuestionCoin},
        {'@', TileClass::QuestionMushroom},
        {'o', TileClass::Coin},
        {'g', TileClass::EnemyGoomba},
        {'k', TileClass::EnemyKoopa},
        {'%', TileClass::Platform},
        {'G', TileClass::EnemyWinged},
        {'K', TileClass::EnemyWinged},
        {'<', TileClass::PipePart},
        {'>', TileClass::PipePart},
        {'[', TileClass::PipePart},
        {']', TileClass::PipePart},
        {'B', TileClass::BulletHead},
    });
    return alphabet;
}

/// Reads an alphabet override: one `<char> <tile-class>` pair per line, in channel order.
/// Blank lines and lines starting with "//" are skipped.
inline TileAlphabet load_alphabet(std::istream& in)
{
    std::vector<TileAlphabet::Entry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line.rfind("//", 0) == 0)
            continue;
        if (line.size() < 3 || line[1] != ' ')
            throw AlphabetError("alphabet line " + std::to_string(line_no) + ": expected '<char> <class>'");
        std::string name = line.substr(2);
        name.erase(0, name.find_first_not_of(" \t"));
        name.erase(name.find_last_not_of(" \t") + 1);
        auto cls = tile_class_from_string(name);
        if (!cls)
            throw AlphabetError("alphabet line " + std::to_string(line_no) + ": unknown tile class '" + name + "'");
        entries.emplace_back(line[0], *cls);
    }
    return TileAlphabet(std::move(entries));
}

/// A 16x56 scene of alphabet indices, row 0 at the top.
struct TileGrid {
    static constexpr int rows = kSceneRows;
    static constexpr int cols = kSceneCols;

    std::array<std::uint8_t, rows * cols> cells{};

    std::uint8_t& operator()(int r, int c) { return cells[static_cast<std::size_t>(r * cols + c)]; }
    std::uint8_t operator()(int r, int c) const { return cells[static_cast<std::size_t>(r * cols + c)]; }

    static TileGrid filled(int index)
    {
        TileGrid g;
        g.cells.fill(static_cast<std::uint8_t>(index));
        return g;
    }

    friend bool operator==(const TileGrid&, const TileGrid&) = default;
};

/// FNV-1a over the cell indices.
inline std::uint64_t grid_hash(const TileGrid& g)
{
    std::uint64_t h = 14695981039346656037ull;
    for (auto v : g.cells) {
        h ^= v;
        h *= 1099511628211ull;
    }
    return h;
}

/// Dense channels x height x width tensor, row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int channels, int height, int width, double value = 0.0)
        : _c(channels), _h(height), _w(width), _data(static_cast<std::size_t>(channels) * height * width, value)
    {
    }

    int channels() const { return _c; }
    int height() const { return _h; }
    int width() const { return _w; }
    std::size_t size() const { return _data.size(); }

    double& operator()(int c, int y, int x) { return _data[index(c, y, x)]; }
    double operator()(int c, int y, int x) const { return _data[index(c, y, x)]; }

    std::vector<double>& data() { return _data; }
    const std::vector<double>& data() const { return _data; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t index(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * _h + static_cast<std::size_t>(y)) * _w + static_cast<std::size_t>(x);
    }

    int _c = 0, _h = 0, _w = 0;
    std::vector<double> _data;
};

class SceneParseError : public Error {
public:
    using Error::Error;
};

class UnknownSymbol : public SceneParseError {
public:
    UnknownSymbol(char symbol, int line, int col)
        : SceneParseError("unknown tile symbol '" + std::string(1, symbol) + "' at line " + std::to_string(line) + ", column " + std::to_string(col)),
          _symbol(symbol), _line(line), _col(col)
    {
    }
    char symbol() const { return _symbol; }
    int line() const { return _line; }
    int column() const { return _col; }

private:
    char _symbol;
    int _line, _col;
};

class WrongLineCount : public SceneParseError {
public:
    explicit WrongLineCount(int n) : SceneParseError("scene must have 16 lines, got " + std::to_string(n)), _count(n) {}
    int count() const { return _count; }

private:
    int _count;
};

class WrongLineWidth : public SceneParseError {
public:
    WrongLineWidth(int line, int width)
        : SceneParseError("scene line " + std::to_string(line) + " has " + std::to_string(width) + " columns, expected 56")
    {
    }
};

struct ParseOptions {
    // Pad short lines with the empty tile and truncate long ones instead of rejecting them.
    bool fit_width = false;
};

inline TileGrid parse_scene(std::string_view text, const TileAlphabet& alphabet = default_alphabet(), ParseOptions opts = {})
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    if (lines.size() != kSceneRows)
        throw WrongLineCount(static_cast<int>(lines.size()));

    const int empty = alphabet.first_of(TileClass::Empty);
    TileGrid grid;
    for (int r = 0; r < kSceneRows; ++r) {
        std::string_view line = lines[static_cast<std::size_t>(r)];
        if (!opts.fit_width && static_cast<int>(line.size()) != kSceneCols)
            throw WrongLineWidth(r, static_cast<int>(line.size()));
        for (int c = 0; c < kSceneCols; ++c) {
            if (c >= static_cast<int>(line.size())) {
                grid(r, c) = static_cast<std::uint8_t>(empty);
                continue;
            }
            auto idx = alphabet.index_of(line[static_cast<std::size_t>(c)]);
            if (!idx)
                throw UnknownSymbol(line[static_cast<std::size_t>(c)], r, c);
            grid(r, c) = static_cast<std::uint8_t>(*idx);
        }
    }
    return grid;
}

inline std::string render_scene(const TileGrid& grid, const TileAlphabet& alphabet = default_alphabet())
{
    std::string out;
    out.reserve(static_cast<std::size_t>(kSceneRows * (kSceneCols + 1)));
    for (int r = 0; r < kSceneRows; ++r) {
        for (int c = 0; c < kSceneCols; ++c)
            out.push_back(alphabet.symbol(grid(r, c)));
        out.push_back('\n');
    }
    return out;
}

/// 17x64x64 one-hot encoding; the scene sits at the top-left, padding is the empty tile.
inline Tensor3 one_hot_encode(const TileGrid& grid, const TileAlphabet& alphabet = default_alphabet())
{
    Tensor3 t(kNumTiles, kCanvasSize, kCanvasSize);
    const int empty = alphabet.first_of(TileClass::Empty);
    for (int y = 0; y < kCanvasSize; ++y)
        for (int x = 0; x < kCanvasSize; ++x) {
            int k = (y < kSceneRows && x < kSceneCols) ? grid(y, x) : empty;
            t(k, y, x) = 1.0;
        }
    return t;
}

class TensorShapeError : public Error {
public:
    using Error::Error;
};

/// Per-cell argmax over the 17 channels of the top-left 16x56 window; ties go to the lowest channel.
inline TileGrid crop_output(const Tensor3& raw)
{
    if (raw.channels() != kNumTiles || raw.height() != kCanvasSize || raw.width() != kCanvasSize)
        throw TensorShapeError("crop_output expects a 17x64x64 tensor");
    TileGrid grid;
    for (int r = 0; r < kSceneRows; ++r)
        for (int c = 0; c < kSceneCols; ++c) {
            int best = 0;
            double best_value = raw(0, r, c);
            for (int k = 1; k < kNumTiles; ++k)
                if (raw(k, r, c) > best_value) {
                    best = k;
                    best_value = raw(k, r, c);
                }
            grid(r, c) = static_cast<std::uint8_t>(best);
        }
    return grid;
}

} // namespace lsi
