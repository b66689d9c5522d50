#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "lsi/lsi.hpp"

namespace lsi::testing {

inline int idx(char symbol) { return *default_alphabet().index_of(symbol); }

inline TileGrid empty_grid() { return TileGrid::filled(idx('-')); }

/// Two rows of ground (rows 14-15) across the whole scene.
inline TileGrid flat_grid()
{
    TileGrid g = empty_grid();
    for (int c = 0; c < kSceneCols; ++c) {
        g(14, c) = static_cast<std::uint8_t>(idx('X'));
        g(15, c) = static_cast<std::uint8_t>(idx('X'));
    }
    return g;
}

inline TileGrid wall_grid(int col = 20)
{
    TileGrid g = flat_grid();
    for (int r = 0; r < kSceneRows; ++r)
        g(r, col) = static_cast<std::uint8_t>(idx('X'));
    return g;
}

inline TileGrid gap_grid(int first = 10, int width = 3)
{
    TileGrid g = flat_grid();
    for (int c = first; c < first + width; ++c) {
        g(14, c) = static_cast<std::uint8_t>(idx('-'));
        g(15, c) = static_cast<std::uint8_t>(idx('-'));
    }
    return g;
}

/// Scene in the style of the training corpus: ground with gaps, pipes, blocks, enemies, coins.
inline TileGrid corpus_style_scene(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> pct(0, 99);
    std::uniform_int_distribution<int> any_tile(0, kNumTiles - 1);
    TileGrid g = flat_grid();
    for (int c = 2; c < kSceneCols - 2; ++c) {
        const int roll = pct(rng);
        if (roll < 6) {
            g(14, c) = g(15, c) = static_cast<std::uint8_t>(idx('-'));
        } else if (roll < 10 && c + 1 < kSceneCols) {
            g(12, c) = static_cast<std::uint8_t>(idx('<'));
            g(12, c + 1) = static_cast<std::uint8_t>(idx('>'));
            g(13, c) = static_cast<std::uint8_t>(idx('['));
            g(13, c + 1) = static_cast<std::uint8_t>(idx(']'));
            ++c;
        } else if (roll < 20) {
            g(13, c) = static_cast<std::uint8_t>(idx(pct(rng) % 2 ? 'g' : 'k'));
        } else if (roll < 35) {
            const char blocks[] = {'S', '?', '@', 'o', '%', '#'};
            g(9, c) = static_cast<std::uint8_t>(idx(blocks[pct(rng) % 6]));
        }
        if (pct(rng) < 3)
            g(4, c) = static_cast<std::uint8_t>(any_tile(rng));
    }
    return g;
}

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string data_path(const std::string& name) { return std::string(LSI_SOURCE_DIR) + "/data/" + name; }

} // namespace lsi::testing
