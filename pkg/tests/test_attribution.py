import itertools
import math

import numpy as np
import pytest

from riskalloc.attribution import (
    CoalitionBacktestRunner,
    CoalitionValueTable,
    METRIC_KEYS,
    Player,
    default_players,
    enumerate_coalition_values,
    shapley_values,
    write_coalitions_csv,
    write_shapley_csv,
)
from riskalloc.errors import ParameterError, RiskallocError


def game_table(players, v):
    """Build a CoalitionValueTable from a scalar game (same value per metric)."""
    n = len(players)
    values = {}
    for mask in range(2**n):
        members = frozenset(i for i in range(n) if mask >> i & 1)
        values[mask] = np.full(len(METRIC_KEYS), float(v(members)))
    return CoalitionValueTable(players=tuple(players), values=values)


def brute_force_shapley(n, v):
    """Average marginal contribution over all join orders (the definition)."""
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for order in perms:
        seen = frozenset()
        for player in order:
            phi[player] += v(seen | {player}) - v(seen)
            seen = seen | {player}
    return phi / len(perms)


PLAYERS_2 = (Player("P0", ("a",)), Player("P1", ("b",)))


class TestEnumerate:
    def test_single_player_two_entries(self):
        table = enumerate_coalition_values((Player("Solo", ("x",)),), lambda assets: [1.0, 2.0, 3.0, 4.0])
        assert set(table.values) == {0, 1}
        assert (table.values[0] == 0.0).all()

    def test_cardinality_toy(self):
        players = tuple(Player(f"P{i}", (f"a{i}",)) for i in range(3))
        table = enumerate_coalition_values(players, lambda assets: [len(assets)] * 4)
        for mask in range(8):
            assert table.values[mask][0] == bin(mask).count("1")

    def test_five_players_give_32_subsets(self):
        players = tuple(Player(f"P{i}", (f"a{i}",)) for i in range(5))
        calls = []

        def runner(assets):
            calls.append(assets)
            return [0.0, 0.0, 0.0, 0.0]

        table = enumerate_coalition_values(players, runner)
        assert len(table.values) == 32
        assert len(calls) == 31  # empty coalition is fixed by convention

    def test_runner_failure_names_subset(self):
        def runner(assets):
            if "b" in assets:
                raise ValueError("boom")
            return [0.0] * 4

        with pytest.raises(RiskallocError, match="P1"):
            enumerate_coalition_values(PLAYERS_2, runner)

    def test_overlapping_players_rejected(self):
        players = (Player("P0", ("a",)), Player("P1", ("a", "b")))
        with pytest.raises(ParameterError, match="disjoint"):
            enumerate_coalition_values(players, lambda assets: [0.0] * 4)

    def test_parallel_matches_sequential(self):
        players = tuple(Player(f"P{i}", (f"a{i}",)) for i in range(3))

        seq = enumerate_coalition_values(players, _sum_len_runner, jobs=1)
        par = enumerate_coalition_values(players, _sum_len_runner, jobs=2)
        for mask in seq.values:
            assert np.array_equal(seq.values[mask], par.values[mask])


def _sum_len_runner(assets):
    return [float(len(assets))] * 4


class TestShapley:
    def test_two_player_hand_example(self):
        def v(s):
            return {frozenset(): 0, frozenset({0}): 1, frozenset({1}): 2, frozenset({0, 1}): 4}[s]

        report = shapley_values(game_table(PLAYERS_2, v))
        np.testing.assert_allclose(report.phi[:, 0], [1.5, 2.5], atol=1e-15)

    def test_additive_game_gives_exact_weights(self):
        a = np.array([0.3, 1.7, -2.2, 0.9])
        players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(4))
        report = shapley_values(game_table(players, lambda s: sum(a[i] for i in s)))
        np.testing.assert_allclose(report.phi[:, 0], a, atol=1e-12)

    def test_matches_brute_force_on_random_games(self):
        rng = np.random.default_rng(13)
        for n in (2, 3, 4, 5):
            players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(n))
            lookup = {
                frozenset(s): float(rng.normal())
                for k in range(n + 1)
                for s in itertools.combinations(range(n), k)
            }
            lookup[frozenset()] = 0.0
            table = game_table(players, lambda s: lookup[frozenset(s)])
            report = shapley_values(table)
            expected = brute_force_shapley(n, lambda s: lookup[frozenset(s)])
            np.testing.assert_allclose(report.phi[:, 0], expected, atol=1e-12)

    def test_efficiency(self):
        rng = np.random.default_rng(21)
        for n in (2, 4, 6):
            players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(n))
            lookup = {}

            def v(s, _lookup=lookup, _rng=rng):
                key = frozenset(s)
                if key not in _lookup:
                    _lookup[key] = 0.0 if not key else float(_rng.normal())
                return _lookup[key]

            table = game_table(players, v)
            report = shapley_values(table)
            grand = table.values[2**n - 1]
            np.testing.assert_allclose(report.totals, grand, atol=1e-10)

    def test_dummy_player_exactly_zero(self):
        # player 2 never changes the value
        def v(s):
            return float(len(s - {2}))

        players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(4))
        report = shapley_values(game_table(players, v))
        assert report.phi[2, 0] == 0.0

    def test_symmetric_players_equal(self):
        # players 0 and 1 interchangeable by construction
        def v(s):
            k = len(s & {0, 1})
            return 3.0 * k + 1.5 * len(s - {0, 1}) + 0.25 * k * len(s - {0, 1})

        players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(4))
        report = shapley_values(game_table(players, v))
        assert abs(report.phi[0, 0] - report.phi[1, 0]) < 1e-12

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(31)
        values = {frozenset(s): float(rng.normal()) for k in range(4) for s in itertools.combinations(range(3), k)}
        values[frozenset()] = 0.0

        players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(3))
        base = shapley_values(game_table(players, lambda s: values[frozenset(s)]))

        perm = (2, 0, 1)  # new index -> old index
        permuted_players = tuple(players[j] for j in perm)
        permuted = shapley_values(
            game_table(permuted_players, lambda s: values[frozenset(perm[i] for i in s)])
        )
        np.testing.assert_allclose(permuted.phi[:, 0], base.phi[[2, 0, 1], 0], atol=1e-12)

    def test_incomplete_table_rejected(self):
        table = CoalitionValueTable(players=PLAYERS_2, values={0: np.zeros(4)})
        with pytest.raises(ParameterError, match="subsets"):
            shapley_values(table)


class TestCoalitionRunner:
    def test_totals_equal_full_backtest(self, mixed_panel):
        runner = CoalitionBacktestRunner(
            panel=mixed_panel,
            sigma_daily=0.1 / math.sqrt(250),
            crypto_cap=0.10,
            burn_in=60,
            vol_half_life=10,
            corr_half_life=20,
        )
        players = default_players(mixed_panel.meta)
        assert [p.name for p in players] == ["IndA", "IndB", "IndC", "IndD", "Crypto"]
        table = enumerate_coalition_values(players, runner)
        report = shapley_values(table)
        full = runner(tuple(mixed_panel.asset_ids))
        np.testing.assert_allclose(report.totals, full, atol=1e-10)

    def test_crypto_cap_only_for_crypto_subsets(self, mixed_panel):
        # an industries-only coalition must be unaffected by the crypto cap
        base = CoalitionBacktestRunner(
            panel=mixed_panel, sigma_daily=0.1 / math.sqrt(250), crypto_cap=0.10,
            burn_in=60, vol_half_life=10, corr_half_life=20,
        )
        uncapped = CoalitionBacktestRunner(
            panel=mixed_panel, sigma_daily=0.1 / math.sqrt(250), crypto_cap=None,
            burn_in=60, vol_half_life=10, corr_half_life=20,
        )
        industries = ("IndA", "IndB", "IndC", "IndD")
        np.testing.assert_array_equal(base(industries), uncapped(industries))
        with_crypto = ("IndA", "CoinA")
        assert not np.array_equal(base(with_crypto), uncapped(with_crypto))

    def test_writers(self, tmp_path, mixed_panel):
        runner = CoalitionBacktestRunner(
            panel=mixed_panel, sigma_daily=0.1 / math.sqrt(250), crypto_cap=0.10,
            burn_in=60, vol_half_life=10, corr_half_life=20,
        )
        players = (Player("Industries", ("IndA", "IndB", "IndC", "IndD")), Player("Crypto", ("CoinA", "CoinB")))
        table = enumerate_coalition_values(players, runner)
        report = shapley_values(table)
        write_shapley_csv(report, tmp_path / "shapley.csv")
        write_coalitions_csv(table, tmp_path / "coalitions.csv")
        shapley_lines = (tmp_path / "shapley.csv").read_text().splitlines()
        assert shapley_lines[0] == "metric,Industries,Crypto,Total"
        assert len(shapley_lines) == 1 + len(METRIC_KEYS)
        coalition_lines = (tmp_path / "coalitions.csv").read_text().splitlines()
        assert len(coalition_lines) == 1 + 4  # header + 2^2 subsets
