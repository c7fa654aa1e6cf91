"""Synthetic chase corpus with a constructible ground truth.

Each generated match has a full 300-ball second innings of random per-ball
runs and a first innings engineered so that the chase target equals the
second-innings total plus or minus a known margin.  The winner is therefore
a deterministic function of features the sequence model can read (the
per-ball runs and the target), which makes these corpora usable as training
oracles: a correct model must approach perfect end-of-innings accuracy.
"""

from __future__ import annotations

import numpy as np

from .ingest import DeliveryRecord, MatchRecord

#: per-ball run values and probabilities for the simulated chase
RUN_VALUES = (0, 1, 2, 3, 4, 6)
RUN_PROBS = (0.45, 0.35, 0.08, 0.02, 0.07, 0.03)

_VENUES = [f"Ground {c}" for c in "ABCDEFGH"]


def _team_pool(size: int) -> list[str]:
    return [f"Team {i:02d}" for i in range(size)]


def _player_pool(size: int) -> list[str]:
    return [f"Player {i:02d}" for i in range(size)]


def _innings_deliveries(
    innings_no: int,
    runs_per_ball: np.ndarray,
    wicket_balls: set[int],
    batting: str,
    players: list[str],
    bowlers: list[str],
    illegal_before: dict[int, list[tuple[str, int]]] | None = None,
) -> list[DeliveryRecord]:
    """Legal deliveries in over.ball order; ``illegal_before`` optionally
    inserts (kind, extra_runs) deliveries ahead of given legal balls, with
    ball numbers counting every delivery the way the corpus dialect does."""
    out = []
    ball_no = 0
    prev_over = -1
    for i, runs in enumerate(runs_per_ball):
        over = i // 6
        if over != prev_over:
            ball_no = 0
            prev_over = over
        common = dict(
            innings_no=innings_no,
            batting_team=batting,
            batsman=players[i % len(players)],
            non_striker=players[(i + 1) % len(players)],
            bowler=bowlers[(i // 6) % len(bowlers)],
        )
        for kind, extra_runs in (illegal_before or {}).get(i, []):
            ball_no += 1
            out.append(
                DeliveryRecord(
                    over=over, ball_in_over=ball_no, runs_off_bat=0,
                    extras=extra_runs, extras_kind=kind, wicket=0, **common,
                )
            )
        ball_no += 1
        out.append(
            DeliveryRecord(
                over=over, ball_in_over=ball_no, runs_off_bat=int(runs),
                extras=0, extras_kind="none", wicket=1 if i in wicket_balls else 0,
                **common,
            )
        )
    return out


def _first_innings_runs(total: int, n_balls: int, rng) -> np.ndarray:
    """Distribute ``total`` runs over ``n_balls`` balls (fours, then ones)."""
    runs = np.zeros(n_balls, dtype=np.int64)
    fours, rest = divmod(total, 4)
    fours = min(fours, n_balls)
    rest = total - 4 * fours
    runs[:fours] = 4
    idx = fours
    while rest > 0 and idx < n_balls:
        step = min(3, rest)
        runs[idx] = step
        rest -= step
        idx += 1
    if rest > 0:  # tiny innings; pile the remainder on the last ball
        runs[-1] += rest
    return rng.permutation(runs)


def synthetic_corpus(
    n_matches: int = 250,
    seed: int = 11,
    margin_low: int = 4,
    margin_high: int = 60,
    team_pool_size: int = 12,
    player_pool_size: int = 40,
    first_innings_balls: int = 240,
    shared_context: bool = False,
    extras_rate: float = 0.0,
) -> list[MatchRecord]:
    """Generate matches where the chasing team wins iff its 300-ball total
    reaches the target, with win margins drawn from [margin_low, margin_high].

    ``shared_context=True`` gives every match the same two teams, the same
    batting orders, and the same venue, so the categorical blocks carry no
    match identity: the only label-predictive features are the per-ball runs
    and the target.  That is the oracle mode; with it, a model that fits the
    data has provably learned the runs/target relation rather than a lookup
    table.  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    teams = _team_pool(team_pool_size)
    players = _player_pool(player_pool_size)
    matches = []
    for k in range(n_matches):
        if shared_context:
            team_idx = np.array([0, 1])
        else:
            team_idx = rng.choice(len(teams), size=2, replace=False)
        first_team, chasing_team = teams[team_idx[0]], teams[team_idx[1]]
        chase_runs = rng.choice(RUN_VALUES, size=300, p=RUN_PROBS)
        illegal_before: dict[int, list[tuple[str, int]]] = {}
        extras_total = 0
        if extras_rate > 0:
            for i in np.flatnonzero(rng.random(300) < extras_rate):
                kind = "wide" if rng.integers(0, 2) else "noball"
                extra_runs = int(rng.integers(1, 3))
                illegal_before.setdefault(int(i), []).append((kind, extra_runs))
                extras_total += extra_runs
        total = int(chase_runs.sum()) + extras_total
        chase_wins = bool(rng.integers(0, 2))
        margin = int(rng.integers(margin_low, margin_high + 1))
        if chase_wins:
            target = total - margin
        else:
            target = total + margin
        target = max(target, 40)  # keep degenerate targets out
        fi_runs_total = target - 1
        fi_runs = _first_innings_runs(fi_runs_total, first_innings_balls, rng)
        fi_wickets = set(
            rng.choice(first_innings_balls, size=int(rng.integers(2, 10)), replace=False).tolist()
        )
        chase_wickets = set(rng.choice(300, size=int(rng.integers(0, 8)), replace=False).tolist())
        # the label must stay a pure function of runs vs target
        winner = chasing_team if total >= target else first_team
        if shared_context:
            batters1 = players[:11]
            batters2 = players[11:22]
        else:
            batters1 = [players[i] for i in rng.choice(len(players), size=11, replace=False)]
            batters2 = [players[i] for i in rng.choice(len(players), size=11, replace=False)]
        deliveries = _innings_deliveries(
            1, fi_runs, fi_wickets, first_team, batters1, batters2
        ) + _innings_deliveries(
            2, chase_runs, chase_wickets, chasing_team, batters2, batters1,
            illegal_before=illegal_before,
        )
        matches.append(
            MatchRecord(
                match_id=f"synth-{seed}-{k:04d}",
                teams=(first_team, chasing_team),
                date=f"2020-{1 + k % 12:02d}-{1 + k % 28:02d}",
                venue=_VENUES[0] if shared_context else _VENUES[k % len(_VENUES)],
                city=None,
                season=str(2010 + k % 10),
                gender="male",
                toss_winner=first_team if k % 2 == 0 else chasing_team,
                toss_decision="bat" if k % 2 == 0 else "field",
                winner=winner,
                outcome_kind="normal",
                first_innings_runs=int(fi_runs.sum()),
                first_innings_wickets=min(10, len(fi_wickets)),
                deliveries=deliveries,
            )
        )
    return matches
