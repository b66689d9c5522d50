#include <gtest/gtest.h>

#include "support.hpp"

using namespace lsi;
using lsi::testing::idx;

namespace {

void put(TileGrid& g, int r, int c, char symbol) { g(r, c) = static_cast<std::uint8_t>(idx(symbol)); }

std::uint8_t bit(Event e) { return static_cast<std::uint8_t>(1u << static_cast<int>(e)); }

SimState run_actions(const Level& level, SimState s, Action a, int ticks)
{
    for (int i = 0; i < ticks; ++i)
        s = step(level, s, a);
    return s;
}

LatentVector random_latent(Rng& rng)
{
    LatentVector z;
    for (auto& v : z.values)
        v = rng.gaussian();
    return z;
}

bool spawnable(const TileGrid& g)
{
    try {
        initial_state(make_level(g));
        return true;
    } catch (const NoSpawnSurface&) {
        return false;
    }
}

} // namespace

TEST(Spawn, HighestSurfaceInFirstColumns)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 0, 'X');
    put(g, 12, 0, 'X');
    const SimState s = initial_state(make_level(g));
    EXPECT_EQ(s.row, 11);
    EXPECT_EQ(s.col, 0);
}

TEST(Spawn, FallsBackToSecondColumn)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 14, 0, '-');
    put(g, 15, 0, '-');
    const SimState s = initial_state(make_level(g));
    EXPECT_EQ(s.col, 1);
}

TEST(Spawn, NoSurface)
{
    EXPECT_THROW(initial_state(make_level(lsi::testing::empty_grid())), NoSpawnSurface);
    EXPECT_THROW(astar_play(lsi::testing::empty_grid()), NoSpawnSurface);
}

TEST(Step, FlatGroundMovesRight)
{
    const Level level = make_level(lsi::testing::flat_grid());
    const SimState s0 = initial_state(level);
    const SimState s1 = step(level, s0, Action::Right);
    EXPECT_EQ(s1.col, s0.col + 1);
    EXPECT_EQ(s1.row, s0.row);
    EXPECT_EQ(s1.events, 0);
    EXPECT_EQ(s1.tick, 1);
}

TEST(Step, SolidBlocksHorizontalMove)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 1, 'X');
    const Level level = make_level(g);
    const SimState s = step(level, initial_state(level), Action::Right);
    EXPECT_EQ(s.col, 0);
}

TEST(Step, WalkingIntoGoombaKillsSmallAgent)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 2, 'g');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.col = 1;
    s = step(level, s, Action::Right);
    EXPECT_TRUE(s.dead);
    EXPECT_TRUE(s.terminal());
    EXPECT_EQ(step(level, s, Action::Right), s);
}

TEST(Step, SuperAgentShrinksInsteadOfDying)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 2, 'g');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.col = 1;
    s.power = Power::Super;
    s = step(level, s, Action::Right);
    EXPECT_FALSE(s.dead);
    EXPECT_EQ(s.power, Power::Small);
    EXPECT_EQ(s.invulnerable, 2);
}

TEST(Step, FallingOntoGoombaStomps)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 5, 'g');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.row = 11;
    s.col = 5;
    s.phase = 5;
    s = run_actions(level, s, Action::None, 2);
    EXPECT_TRUE(s.event(Event::Stomp));
    EXPECT_TRUE(s.entities.empty());
    EXPECT_FALSE(s.dead);
    EXPECT_EQ(s.row, 13);
    EXPECT_EQ(s.phase, 0);
}

TEST(Step, StompedKoopaShellKillsGoomba)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 5, 'k');
    put(g, 13, 14, 'g');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.row = 11;
    s.col = 5;
    s.phase = 5;
    s.facing = 1;
    s = run_actions(level, s, Action::None, 2);
    ASSERT_TRUE(s.event(Event::Stomp));
    ASSERT_EQ(s.entities.size(), 2u);
    EXPECT_EQ(s.entities[0].kind, EntityKind::Shell);
    EXPECT_EQ(s.entities[0].dir, 1);
    s = run_actions(level, s, Action::None, 8);
    EXPECT_TRUE(s.event(Event::ShellKill));
    EXPECT_FALSE(s.dead);
}

TEST(Step, EnemyFallsThroughGap)
{
    TileGrid g = lsi::testing::flat_grid();
    for (int c = 5; c < 7; ++c) {
        put(g, 14, c, '-');
        put(g, 15, c, '-');
    }
    put(g, 13, 8, 'g');
    const Level level = make_level(g);
    const SimState s = run_actions(level, initial_state(level), Action::None, 12);
    EXPECT_TRUE(s.event(Event::EnemyFallDeath));
    EXPECT_TRUE(s.entities.empty());
}

TEST(Step, CoinCollectedOnce)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 13, 2, 'o');
    const Level level = make_level(g);
    SimState s = run_actions(level, initial_state(level), Action::Right, 2);
    EXPECT_EQ(s.events, bit(Event::Coin));
    EXPECT_EQ(s.consumed.size(), 1u);
    s = run_actions(level, s, Action::Left, 1);
    s = run_actions(level, s, Action::Right, 1);
    EXPECT_EQ(s.consumed.size(), 1u);
}

TEST(Step, BumpingQuestionBlockGivesCoin)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 10, 3, '?');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.col = 3;
    s = run_actions(level, s, Action::JumpNone, 3);
    EXPECT_TRUE(s.event(Event::Coin));
    EXPECT_TRUE(s.event(Event::Jump));
    // the used block stays solid
    EXPECT_EQ(s.consumed.size(), 1u);
}

TEST(Step, MushroomBlockSpawnsAndMushroomPowersUp)
{
    TileGrid g = lsi::testing::flat_grid();
    put(g, 10, 3, '@');
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s.col = 3;
    s.facing = 1;
    s = run_actions(level, s, Action::JumpNone, 2);
    ASSERT_EQ(s.entities.size(), 1u);
    EXPECT_EQ(s.entities[0].kind, EntityKind::Mushroom);

    SimState t = initial_state(level);
    t.entities.push_back({13, 1, 1, EntityKind::Mushroom});
    t = step(level, t, Action::Right);
    EXPECT_TRUE(t.event(Event::Mushroom));
    EXPECT_EQ(t.power, Power::Super);
}

TEST(Step, JumpProfileAndHighJump)
{
    const Level level = make_level(lsi::testing::flat_grid());
    SimState s = initial_state(level);
    const int ground = s.row;
    std::vector<int> rows;
    for (int i = 0; i < 8 && (i == 0 || s.phase != 0); ++i) {
        s = step(level, s, Action::JumpNone);
        rows.push_back(ground - s.row);
    }
    EXPECT_EQ(rows, (std::vector<int>{2, 3, 4, 4, 3, 1, 0}));
    EXPECT_TRUE(s.event(Event::HighJump));
    EXPECT_FALSE(s.event(Event::LongJump));
}

TEST(Step, ReleasingJumpCutsRise)
{
    const Level level = make_level(lsi::testing::flat_grid());
    SimState s = initial_state(level);
    const int ground = s.row;
    s = step(level, s, Action::JumpNone);
    s = step(level, s, Action::JumpNone);
    s = step(level, s, Action::None);
    EXPECT_EQ(ground - s.row, 2);
    s = run_actions(level, s, Action::None, 3);
    EXPECT_EQ(s.row, ground);
    EXPECT_TRUE(s.event(Event::HighJump)); // peak rise 3
}

TEST(Step, FallingOutOfSceneIsTerminal)
{
    TileGrid g = lsi::testing::flat_grid();
    for (int c = 1; c < 4; ++c) {
        put(g, 14, c, '-');
        put(g, 15, c, '-');
    }
    const Level level = make_level(g);
    SimState s = initial_state(level);
    s = run_actions(level, s, Action::Right, 1);
    s = run_actions(level, s, Action::None, 5);
    EXPECT_TRUE(s.dead);
}

TEST(AStar, FlatSceneIsEventless)
{
    const PlaythroughTrace t = astar_play(lsi::testing::flat_grid());
    EXPECT_EQ(t.completion, 1.0);
    EXPECT_TRUE(t.success);
    EXPECT_EQ(t.events, 0);
    EXPECT_EQ(t.steps, kSceneCols - 1);
}

TEST(AStar, FullHeightWallStopsAgent)
{
    const PlaythroughTrace t = astar_play(lsi::testing::wall_grid(20));
    EXPECT_LE(t.completion, 20.0 / 56.0);
    EXPECT_FALSE(t.success);
}

TEST(AStar, ThreeWideGapNeedsLongJump)
{
    const PlaythroughTrace t = astar_play(lsi::testing::gap_grid(10, 3));
    EXPECT_EQ(t.completion, 1.0);
    const auto bits = classify_events(t);
    EXPECT_TRUE(bits[0]);
    EXPECT_TRUE(bits[2]);
    EXPECT_FALSE(bits[3]);
}

TEST(AStar, ThreeHighStepNeedsHighJump)
{
    TileGrid g = lsi::testing::flat_grid();
    for (int c = 10; c < 12; ++c)
        for (int r = 11; r < 14; ++r)
            put(g, r, c, 'X');
    const PlaythroughTrace t = astar_play(g);
    EXPECT_TRUE(t.success);
    EXPECT_TRUE(t.event(Event::HighJump));
}

TEST(AStar, FiveHighWallIsImpassable)
{
    TileGrid g = lsi::testing::flat_grid();
    for (int r = 9; r < 14; ++r)
        put(g, r, 30, 'X');
    const PlaythroughTrace t = astar_play(g);
    EXPECT_FALSE(t.success);
    EXPECT_EQ(t.completion, 30.0 / 56.0);
}

TEST(AStar, ShippedScenesAreCompletable)
{
    for (const char* name : {"overworld.txt", "underground.txt"}) {
        const TileGrid g = parse_scene(lsi::testing::read_text(lsi::testing::data_path(name)));
        const PlaythroughTrace t = astar_play(g);
        EXPECT_TRUE(t.success) << name << " completion " << t.completion;
    }
}

TEST(AStar, DeterministicAcrossRuns)
{
    const TileGrid g = parse_scene(lsi::testing::read_text(lsi::testing::data_path("overworld.txt")));
    const PlaythroughTrace first = astar_play(g);
    for (int i = 0; i < 20; ++i) {
        const PlaythroughTrace t = astar_play(g);
        ASSERT_EQ(t.actions, first.actions);
        ASSERT_EQ(t.events, first.events);
        ASSERT_EQ(t.nodes_expanded, first.nodes_expanded);
    }
}

TEST(AStar, ReplayReproducesTrace)
{
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        const TileGrid g = synthetic_decode(random_latent(rng));
        if (!spawnable(g))
            continue;
        const Level level = make_level(g);
        const PlaythroughTrace t = astar_play(level);
        const auto states = replay(level, t.actions);
        ASSERT_EQ(states.size(), t.actions.size() + 1);
        std::uint8_t seen = 0;
        for (const auto& s : states) {
            EXPECT_EQ(s.events & seen, seen) << "events must stay set";
            seen = s.events;
        }
        EXPECT_EQ(states.back().events, t.events);
        EXPECT_EQ((states.back().max_col + 1) / 56.0, t.completion);
        EXPECT_EQ(t.success, t.completion == 1.0);
    }
}

TEST(AStar, CompletionMonotoneInBudget)
{
    Rng rng(8);
    for (int i = 0; i < 15; ++i) {
        const TileGrid g = synthetic_decode(random_latent(rng));
        if (!spawnable(g))
            continue;
        double last = 0.0;
        for (std::size_t budget : {1, 10, 100, 1000, 10000, 200000}) {
            const double c = astar_play(g, {budget, 1120}).completion;
            EXPECT_GE(c, last) << "scene " << i << " budget " << budget;
            last = c;
        }
    }
}

TEST(AStar, RemovingEnemiesNeverHurts)
{
    Rng rng(12);
    const int empty = idx('-');
    for (int i = 0; i < 40; ++i) {
        LatentVector z = random_latent(rng);
        for (std::size_t k = 16; k < 24; ++k)
            z[k] += 1.0;
        const TileGrid g = synthetic_decode(z);
        if (!spawnable(g))
            continue;
        TileGrid calm = g;
        for (auto& v : calm.cells)
            if (is_enemy(default_alphabet().tile_class(v)))
                v = static_cast<std::uint8_t>(empty);
        EXPECT_GE(astar_play(calm).completion, astar_play(g).completion) << "scene " << i;
    }
}

TEST(ClassifyEvents, BitOrder)
{
    PlaythroughTrace t;
    EXPECT_EQ(classify_events(t), (std::array<bool, 8>{}));
    t.events = bit(Event::Coin);
    EXPECT_EQ(classify_events(t), (std::array<bool, 8>{false, false, false, false, false, false, false, true}));
    EXPECT_EQ(kEventNames[2], "long-jump");
}
