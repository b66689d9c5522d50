#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <queue>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lsi/error.hpp"
#include "lsi/level_model.hpp"

// Discrete-cell surrogate platformer and a deterministic A* playability agent.
//
// One tick: jump start/cut, horizontal move (1 cell), vertical move, entity update,
// contact resolution. The agent occupies one cell. Jumps rise +2,+1,+1,0 while the jump
// button is held and fall -1 then -2 per tick afterwards. Walking enemies move one cell
// every second tick, shells two cells per tick and mushrooms one cell per tick; every entity
// without support falls one cell per tick instead of moving sideways.

namespace lsi {

enum class Action : std::uint8_t { Left, Right, None, JumpLeft, JumpRight, JumpNone };

inline constexpr std::array<Action, 6> kAllActions{Action::Left, Action::Right, Action::None,
                                                   Action::JumpLeft, Action::JumpRight, Action::JumpNone};

inline constexpr bool has_jump(Action a) { return a == Action::JumpLeft || a == Action::JumpRight || a == Action::JumpNone; }

inline constexpr int horizontal(Action a)
{
    switch (a) {
    case Action::Left:
    case Action::JumpLeft:
        return -1;
    case Action::Right:
    case Action::JumpRight:
        return 1;
    default:
        return 0;
    }
}

inline std::string_view to_string(Action a)
{
    static constexpr std::array<std::string_view, 6> names{"left", "right", "none", "jump-left", "jump-right", "jump-none"};
    return names[static_cast<std::size_t>(a)];
}

/// Gameplay events in the fixed agent-BC order.
enum class Event : std::uint8_t {
    Jump = 0,
    HighJump,
    LongJump,
    Stomp,
    ShellKill,
    EnemyFallDeath,
    Mushroom,
    Coin,
};

inline constexpr int kNumEvents = 8;
inline constexpr int kHighJumpRise = 3;
inline constexpr int kLongJumpDistance = 4;
inline constexpr int kGoalCol = kSceneCols - 1;

inline constexpr std::array<std::string_view, kNumEvents> kEventNames{
    "jump", "high-jump", "long-jump", "stomp-kill", "shell-kill", "enemy-fall-death", "mushroom-collected", "coin-collected"};

enum class Power : std::uint8_t { Small, Super };

enum class EntityKind : std::uint8_t { Goomba, Koopa, Winged, Shell, Mushroom };

constexpr bool is_walker(EntityKind k) { return k == EntityKind::Goomba || k == EntityKind::Koopa || k == EntityKind::Winged; }

struct Entity {
    std::int8_t row = 0;
    std::int8_t col = 0;
    std::int8_t dir = -1;
    EntityKind kind = EntityKind::Goomba;

    friend bool operator==(const Entity&, const Entity&) = default;
};

class NoSpawnSurface : public Error {
public:
    NoSpawnSurface() : Error("no solid tile in columns 0-1 to spawn the agent on") {}
};

/// Static tile layer of a scene; enemies are lifted out into entities.
struct Level {
    std::array<TileClass, kSceneRows * kSceneCols> tiles{};
    std::vector<Entity> entities;

    static int cell(int r, int c) { return r * kSceneCols + c; }
};

inline Level make_level(const TileGrid& grid, const TileAlphabet& alphabet = default_alphabet())
{
    Level level;
    for (int r = 0; r < kSceneRows; ++r)
        for (int c = 0; c < kSceneCols; ++c) {
            TileClass t = alphabet.tile_class(grid(r, c));
            if (is_enemy(t)) {
                EntityKind kind = t == TileClass::EnemyKoopa ? EntityKind::Koopa
                                  : t == TileClass::EnemyWinged ? EntityKind::Winged
                                                                : EntityKind::Goomba;
                level.entities.push_back({static_cast<std::int8_t>(r), static_cast<std::int8_t>(c), -1, kind});
                t = TileClass::Empty;
            }
            level.tiles[static_cast<std::size_t>(Level::cell(r, c))] = t;
        }
    return level;
}

struct SimState {
    std::int8_t row = 0;
    std::int8_t col = 0;
    // 0 grounded, 1..4 rising (+2,+1,+1,0), 5 falling -1, 6 falling -2
    std::int8_t phase = 0;
    std::int8_t facing = 1;
    Power power = Power::Small;
    std::int8_t invulnerable = 0;
    bool dead = false;
    bool finished = false;
    std::int8_t max_col = 0;
    std::uint16_t tick = 0;
    std::uint16_t jumps = 0;

    bool jump_active = false;
    std::int8_t takeoff_row = 0;
    std::int8_t takeoff_col = 0;

    std::uint8_t events = 0;
    std::vector<Entity> entities;
    // sorted cell indices of collected coins and used question blocks
    std::vector<std::uint16_t> consumed;

    bool airborne() const { return phase != 0; }
    bool terminal() const { return dead || finished; }
    bool event(Event e) const { return (events >> static_cast<int>(e)) & 1u; }

    friend bool operator==(const SimState&, const SimState&) = default;
};

/// Spawn on the highest solid surface of column 0, else column 1.
inline SimState initial_state(const Level& level)
{
    for (int c = 0; c < 2; ++c)
        for (int r = 1; r < kSceneRows; ++r) {
            const bool solid_here = is_solid(level.tiles[static_cast<std::size_t>(Level::cell(r, c))]);
            const bool solid_above = is_solid(level.tiles[static_cast<std::size_t>(Level::cell(r - 1, c))]);
            if (solid_here && !solid_above) {
                SimState s;
                s.row = static_cast<std::int8_t>(r - 1);
                s.col = static_cast<std::int8_t>(c);
                s.max_col = s.col;
                s.entities = level.entities;
                return s;
            }
        }
    throw NoSpawnSurface();
}

namespace detail {

    class Stepper {
    public:
        Stepper(const Level& level, SimState& s) : _level(level), _s(s) {}

        void run(Action action)
        {
            if (_s.terminal())
                return;
            ++_s.tick;
            const bool protected_at_start = _s.invulnerable > 0;

            if (has_jump(action) && _s.phase == 0) {
                _s.phase = 1;
                ++_s.jumps;
                _s.jump_active = true;
                _s.takeoff_row = _s.row;
                _s.takeoff_col = _s.col;
                set(Event::Jump);
            } else if (!has_jump(action) && _s.phase >= 2 && _s.phase <= 4) {
                _s.phase = 5;
            }

            move_horizontal(horizontal(action));
            if (!_s.dead)
                move_vertical();
            track_jump();
            if (!_s.dead)
                update_entities();
            if (!_s.dead)
                touch_entities();

            if (protected_at_start && !_hit_this_tick && _s.invulnerable > 0)
                --_s.invulnerable;
            if (_s.dead)
                return;
            _s.max_col = std::max(_s.max_col, _s.col);
            if (_s.col == kGoalCol)
                _s.finished = true;
        }

    private:
        TileClass tile(int r, int c) const
        {
            const auto idx = static_cast<std::uint16_t>(Level::cell(r, c));
            TileClass t = _level.tiles[idx];
            if ((t == TileClass::Coin || t == TileClass::QuestionCoin || t == TileClass::QuestionMushroom) && consumed(idx))
                return t == TileClass::Coin ? TileClass::Empty : TileClass::Solid;
            return t;
        }

        bool consumed(std::uint16_t idx) const { return std::binary_search(_s.consumed.begin(), _s.consumed.end(), idx); }

        void consume(int r, int c)
        {
            const auto idx = static_cast<std::uint16_t>(Level::cell(r, c));
            _s.consumed.insert(std::upper_bound(_s.consumed.begin(), _s.consumed.end(), idx), idx);
        }

        // Out-of-grid: the sides and the ceiling block, the bottom is open.
        bool solid(int r, int c) const
        {
            if (r > kSceneRows - 1)
                return false;
            if (r < 0 || c < 0 || c >= kSceneCols)
                return true;
            return is_solid(tile(r, c));
        }

        void set(Event e) { _s.events |= static_cast<std::uint8_t>(1u << static_cast<int>(e)); }

        void damage()
        {
            if (_s.invulnerable > 0)
                return;
            if (_s.power == Power::Super) {
                _s.power = Power::Small;
                _s.invulnerable = 2;
                _hit_this_tick = true;
            } else {
                _s.dead = true;
            }
        }

        // Coins, mushrooms and walking enemies in the agent's current cell.
        void enter_cell()
        {
            if (tile(_s.row, _s.col) == TileClass::Coin) {
                consume(_s.row, _s.col);
                set(Event::Coin);
            }
            touch_entities();
        }

        void touch_entities()
        {
            for (std::size_t i = 0; i < _s.entities.size();) {
                const Entity& e = _s.entities[i];
                if (e.row == _s.row && e.col == _s.col) {
                    if (e.kind == EntityKind::Mushroom) {
                        _s.power = Power::Super;
                        set(Event::Mushroom);
                        _s.entities.erase(_s.entities.begin() + static_cast<std::ptrdiff_t>(i));
                        continue;
                    }
                    if (is_walker(e.kind)) {
                        damage();
                        if (_s.dead)
                            return;
                    }
                }
                ++i;
            }
        }

        void move_horizontal(int dx)
        {
            if (dx == 0)
                return;
            _s.facing = static_cast<std::int8_t>(dx);
            const int target = _s.col + dx;
            if (solid(_s.row, target))
                return;
            _s.col = static_cast<std::int8_t>(target);
            enter_cell();
        }

        void bump(int r, int c)
        {
            if (r < 0)
                return;
            const TileClass t = tile(r, c);
            if (t == TileClass::QuestionCoin) {
                consume(r, c);
                set(Event::Coin);
            } else if (t == TileClass::QuestionMushroom) {
                consume(r, c);
                if (r - 1 >= 0 && !solid(r - 1, c))
                    _s.entities.push_back({static_cast<std::int8_t>(r - 1), static_cast<std::int8_t>(c), _s.facing, EntityKind::Mushroom});
            }
        }

        void move_vertical()
        {
            if (_s.phase == 0) {
                if (solid(_s.row + 1, _s.col))
                    return;
                _s.phase = 5; // walked off a ledge
            }
            if (_s.phase <= 4) {
                static constexpr std::array<int, 4> rise{2, 1, 1, 0};
                const int dy = rise[static_cast<std::size_t>(_s.phase - 1)];
                for (int i = 0; i < dy; ++i) {
                    if (solid(_s.row - 1, _s.col)) {
                        bump(_s.row - 1, _s.col);
                        _s.phase = 5;
                        return;
                    }
                    --_s.row;
                    enter_cell();
                    if (_s.dead)
                        return;
                }
                ++_s.phase;
                return;
            }

            const int dy = _s.phase == 5 ? 1 : 2;
            for (int i = 0; i < dy; ++i) {
                if (_s.row + 1 > kSceneRows - 1) {
                    _s.dead = true; // fell out of the scene
                    return;
                }
                if (solid(_s.row + 1, _s.col)) {
                    land();
                    return;
                }
                stomp(_s.row + 1, _s.col);
                ++_s.row;
                enter_cell();
                if (_s.dead)
                    return;
            }
            if (solid(_s.row + 1, _s.col))
                land();
            else
                _s.phase = 6;
        }

        void land()
        {
            track_jump();
            _s.phase = 0;
            _s.jump_active = false;
        }

        void stomp(int r, int c)
        {
            for (std::size_t i = 0; i < _s.entities.size(); ++i) {
                Entity& e = _s.entities[i];
                if (e.row != r || e.col != c || !is_walker(e.kind))
                    continue;
                set(Event::Stomp);
                if (e.kind == EntityKind::Koopa) {
                    e.kind = EntityKind::Shell;
                    e.dir = _s.facing;
                } else {
                    _s.entities.erase(_s.entities.begin() + static_cast<std::ptrdiff_t>(i));
                }
                return;
            }
        }

        void track_jump()
        {
            if (!_s.jump_active)
                return;
            if (_s.takeoff_row - _s.row >= kHighJumpRise)
                set(Event::HighJump);
            if (std::abs(_s.col - _s.takeoff_col) >= kLongJumpDistance)
                set(Event::LongJump);
        }

        void update_entities()
        {
            auto& ents = _s.entities;
            std::vector<bool> removed(ents.size(), false);
            auto supported = [this](const Entity& e) { return solid(e.row + 1, e.col); };

            for (std::size_t i = 0; i < ents.size(); ++i) {
                if (removed[i])
                    continue;
                Entity& e = ents[i];
                if (!supported(e)) {
                    ++e.row;
                    if (e.row > kSceneRows - 1) {
                        removed[i] = true;
                        if (is_walker(e.kind))
                            set(Event::EnemyFallDeath);
                        continue;
                    }
                    if (e.kind == EntityKind::Shell)
                        shell_hits(i, removed);
                    continue;
                }
                int moves = 0;
                if (is_walker(e.kind))
                    moves = (_s.tick % 2 == 0) ? 1 : 0;
                else if (e.kind == EntityKind::Shell)
                    moves = 2;
                else
                    moves = 1;
                for (int m = 0; m < moves; ++m) {
                    const int target = e.col + e.dir;
                    if (target < 0 || target >= kSceneCols) {
                        removed[i] = true;
                        break;
                    }
                    if (solid(e.row, target)) {
                        e.dir = static_cast<std::int8_t>(-e.dir);
                        continue;
                    }
                    e.col = static_cast<std::int8_t>(target);
                    if (e.kind == EntityKind::Shell)
                        shell_hits(i, removed);
                }
            }
            std::size_t w = 0;
            for (std::size_t i = 0; i < ents.size(); ++i)
                if (!removed[i])
                    ents[w++] = ents[i];
            ents.resize(w);
        }

        void shell_hits(std::size_t shell, std::vector<bool>& removed)
        {
            auto& ents = _s.entities;
            for (std::size_t j = 0; j < ents.size(); ++j) {
                if (j == shell || removed[j] || !is_walker(ents[j].kind))
                    continue;
                if (ents[j].row == ents[shell].row && ents[j].col == ents[shell].col) {
                    removed[j] = true;
                    set(Event::ShellKill);
                }
            }
        }

        const Level& _level;
        SimState& _s;
        bool _hit_this_tick = false;
    };

} // namespace detail

/// Advances `state` by one tick. Terminal states are returned unchanged.
inline SimState step(const Level& level, SimState state, Action action)
{
    detail::Stepper(level, state).run(action);
    return state;
}

struct PlaythroughTrace {
    double completion = 0.0;
    std::uint8_t events = 0;
    int steps = 0;
    bool success = false;
    std::vector<Action> actions;
    std::size_t nodes_expanded = 0;

    bool event(Event e) const { return (events >> static_cast<int>(e)) & 1u; }
};

struct AStarOptions {
    std::size_t node_budget = 200000;
    int tick_budget = kSceneCols * 20;
};

namespace detail {

    inline std::uint64_t mix(std::uint64_t h, std::uint64_t v)
    {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }

    inline constexpr int kKeyEntityWindow = 4;

    // Closed-set key: agent kinematics, power, world mutations and the entities near the
    // agent (relative positions). Time and far-away entities are left out so
    // the search space stays small; this makes the agent approximate but deterministic.
    inline std::uint64_t search_key(const SimState& s)
    {
        std::uint64_t h = 0;
        h = mix(h, static_cast<std::uint64_t>(static_cast<std::uint8_t>(s.row)));
        h = mix(h, static_cast<std::uint64_t>(static_cast<std::uint8_t>(s.col)));
        h = mix(h, static_cast<std::uint64_t>(s.phase));
        h = mix(h, static_cast<std::uint64_t>(static_cast<std::uint8_t>(s.facing)));
        h = mix(h, static_cast<std::uint64_t>(s.power));
        h = mix(h, static_cast<std::uint64_t>(s.invulnerable));
        for (auto c : s.consumed)
            h = mix(h, 0x10000u + c);
        bool near = false;
        for (const auto& e : s.entities) {
            const int dc = e.col - s.col;
            if (dc < -kKeyEntityWindow || dc > kKeyEntityWindow)
                continue;
            near = true;
            const auto packed = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(e.row - s.row)) << 24) |
                                (static_cast<std::uint64_t>(static_cast<std::uint8_t>(dc)) << 16) |
                                (static_cast<std::uint64_t>(static_cast<std::uint8_t>(e.dir)) << 8) |
                                static_cast<std::uint64_t>(e.kind);
            h = mix(h, 0x1000000000ull | packed);
        }
        if (near)
            h = mix(h, 0x2000000000ull | (s.tick % 2u));
        return h;
    }

} // namespace detail

/// A* over the deterministic simulator. Cost is ticks, the heuristic is the remaining column
/// distance. Ties prefer fewer jumps, then lower tick. When the goal is not reached within the
/// node budget the path to the alive state with the largest column is returned.
inline PlaythroughTrace astar_play(const Level& level, AStarOptions opts = {})
{
    struct Node {
        SimState state;
        std::int32_t parent;
        Action action;
    };
    struct Entry {
        int f;
        int jumps;
        int tick;
        std::int32_t node;
        bool operator>(const Entry& o) const
        {
            if (f != o.f)
                return f > o.f;
            if (jumps != o.jumps)
                return jumps > o.jumps;
            if (tick != o.tick)
                return tick > o.tick;
            return node > o.node;
        }
    };

    std::vector<Node> nodes;
    nodes.reserve(1024);
    nodes.push_back({initial_state(level), -1, Action::None});

    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::unordered_set<std::uint64_t> closed;
    auto push = [&](std::int32_t idx) {
        const SimState& s = nodes[static_cast<std::size_t>(idx)].state;
        open.push({s.tick + (kGoalCol - s.col), s.jumps, s.tick, idx});
    };
    push(0);

    std::int32_t best = 0;
    std::int32_t goal = -1;
    std::size_t expanded = 0;

    while (!open.empty()) {
        const Entry top = open.top();
        open.pop();
        const SimState& cur = nodes[static_cast<std::size_t>(top.node)].state;
        if (cur.finished) {
            goal = top.node;
            break;
        }
        if (!closed.insert(detail::search_key(cur)).second)
            continue;
        if (expanded >= opts.node_budget)
            break;
        ++expanded;
        if (cur.tick >= opts.tick_budget)
            continue;

        for (Action a : kAllActions) {
            SimState next = step(level, nodes[static_cast<std::size_t>(top.node)].state, a);
            if (next.dead)
                continue;
            if (!next.finished && closed.count(detail::search_key(next)))
                continue;
            const auto idx = static_cast<std::int32_t>(nodes.size());
            const int next_max = next.max_col;
            nodes.push_back({std::move(next), top.node, a});
            if (next_max > nodes[static_cast<std::size_t>(best)].state.max_col)
                best = idx;
            push(idx);
        }
    }

    PlaythroughTrace trace;
    const std::int32_t end = goal >= 0 ? goal : best;
    const SimState& fin = nodes[static_cast<std::size_t>(end)].state;
    trace.success = goal >= 0;
    trace.completion = trace.success ? 1.0 : static_cast<double>(fin.max_col + 1) / kSceneCols;
    trace.events = fin.events;
    trace.steps = fin.tick;
    trace.nodes_expanded = expanded;
    for (std::int32_t n = end; nodes[static_cast<std::size_t>(n)].parent >= 0; n = nodes[static_cast<std::size_t>(n)].parent)
        trace.actions.push_back(nodes[static_cast<std::size_t>(n)].action);
    std::reverse(trace.actions.begin(), trace.actions.end());
    return trace;
}

inline PlaythroughTrace astar_play(const TileGrid& grid, AStarOptions opts = {}, const TileAlphabet& alphabet = default_alphabet())
{
    return astar_play(make_level(grid, alphabet), opts);
}

/// Agent-based BC bits: bit i is event i in the order jump, high jump, long jump, stomp,
/// shell kill, enemy fall death, mushroom, coin.
inline std::array<bool, kNumEvents> classify_events(const PlaythroughTrace& trace)
{
    std::array<bool, kNumEvents> bits{};
    for (int i = 0; i < kNumEvents; ++i)
        bits[static_cast<std::size_t>(i)] = (trace.events >> i) & 1u;
    return bits;
}

/// States visited when replaying `actions` from the spawn, including the spawn itself.
inline std::vector<SimState> replay(const Level& level, const std::vector<Action>& actions)
{
    std::vector<SimState> states{initial_state(level)};
    for (Action a : actions)
        states.push_back(step(level, states.back(), a));
    return states;
}

} // namespace lsi
