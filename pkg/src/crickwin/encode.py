"""Fixed-length innings encoding: 300 rows of per-ball features.

An innings is first *legalized*: wides and no-balls do not count toward the
over, so their runs, extras, and wicket flags are merged into the nearest
preceding legal ball of the same over (or the next legal ball when they open
an over).  The result is at most 300 legal-ball records, which map 1:1 onto
the rows of a ``300 x total_dim`` feature matrix.  Rows past the innings
length stay all-zero and are excluded from the loss via the mask.

Slot order is owned by :class:`FeatureLayout` and versioned; checkpoints
embed the layout and vocabularies so that serving reproduces training
encoding exactly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .ingest import DeliveryRecord, ILLEGAL_KINDS, MatchRecord

SEQUENCE_LENGTH = 300
LAYOUT_VERSION = 1

CONTINUOUS_SLOTS = ("ball_index", "over", "ball_in_over", "runs_off_bat", "extras", "wicket")
AUG_SLOTS = ("prematch_prob", "target_norm", "fi_wickets_norm")

# normalization constants chosen to keep features near [0,1]
RUNS_SCALE = 6.0
EXTRAS_SCALE = 6.0
OVER_SCALE = 49.0
BALL_IN_OVER_SCALE = 6.0
TARGET_SCALE = 350.0
CUM_EXTRAS_SCALE = 75.0
WICKETS_SCALE = 10.0
#: hard ceiling for position-like slots (an over with many illegal deliveries
#: can push ball_in_over past 6; run/extras slots are never clipped because
#: they must conserve totals)
CONTINUOUS_CEIL = 1.5

UNK_TOKEN = "<unk>"


class EncodeError(Exception):
    """Base class for encoding failures."""


class EmptyCorpus(EncodeError):
    pass


class UnknownInnings(EncodeError):
    pass


class LayoutMismatch(EncodeError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """Dense token index with a reserved trailing UNK slot.

    Kept tokens are those appearing in at least ``min_count`` training
    matches, ranked by descending match frequency then lexicographically,
    truncated to ``cap`` entries.  Everything else maps to ``unk_index``.
    """

    kind: str
    token_to_index: dict[str, int]
    min_count: int
    cap: int
    unk_index: int

    @property
    def size(self) -> int:
        return self.unk_index + 1

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, self.unk_index)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "token_to_index": dict(self.token_to_index),
            "min_count": self.min_count,
            "cap": self.cap,
            "unk_index": self.unk_index,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabulary":
        return cls(
            kind=obj["kind"],
            token_to_index=dict(obj["token_to_index"]),
            min_count=obj["min_count"],
            cap=obj["cap"],
            unk_index=obj["unk_index"],
        )


def build_vocabulary(
    matches: list[MatchRecord], kind: str, min_count: int, cap: int
) -> Vocabulary:
    """Build a token index from TRAIN-split matches only.

    ``kind`` selects which tokens are counted: ``team`` counts each team once
    per match, ``player`` counts batsman/non-striker/bowler appearances once
    per match, ``venue`` counts the venue.  Rare tokens (below ``min_count``
    matches) and tokens beyond the ``cap`` most frequent map to UNK.
    """
    if not matches:
        raise EmptyCorpus("cannot build a vocabulary from zero matches")
    counts: Counter = Counter()
    for m in matches:
        if kind == "team":
            tokens = set(m.teams)
        elif kind == "player":
            tokens = set()
            for d in m.deliveries:
                tokens.update((d.batsman, d.non_striker, d.bowler))
        elif kind == "venue":
            tokens = {m.venue} if m.venue else set()
        else:
            raise ValueError(f"unknown vocabulary kind {kind!r}")
        for t in tokens:
            counts[t] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, c in ranked if c >= min_count][:cap]
    return Vocabulary(
        kind=kind,
        token_to_index={tok: i for i, tok in enumerate(kept)},
        min_count=min_count,
        cap=cap,
        unk_index=len(kept),
    )


@dataclass(frozen=True)
class FeatureLayout:
    """Column assignment for the feature matrix.

    ``continuous`` and ``aug`` map slot names to single columns; the four
    categorical blocks are half-open ``(start, stop)`` ranges.  All ranges
    are contiguous, disjoint, and cover exactly ``[0, total_dim)``.
    """

    layout_version: int
    continuous: dict[str, int]
    team: tuple[int, int]
    batsman: tuple[int, int]
    non_striker: tuple[int, int]
    bowler: tuple[int, int]
    aug: dict[str, int]
    total_dim: int

    @classmethod
    def build(cls, team_size: int, player_size: int) -> "FeatureLayout":
        cont = {name: i for i, name in enumerate(CONTINUOUS_SLOTS)}
        pos = len(CONTINUOUS_SLOTS)
        team = (pos, pos + team_size)
        pos = team[1]
        batsman = (pos, pos + player_size)
        pos = batsman[1]
        non_striker = (pos, pos + player_size)
        pos = non_striker[1]
        bowler = (pos, pos + player_size)
        pos = bowler[1]
        aug = {name: pos + i for i, name in enumerate(AUG_SLOTS)}
        return cls(
            layout_version=LAYOUT_VERSION,
            continuous=cont,
            team=team,
            batsman=batsman,
            non_striker=non_striker,
            bowler=bowler,
            aug=aug,
            total_dim=pos + len(AUG_SLOTS),
        )

    def categorical_ranges(self) -> dict[str, tuple[int, int]]:
        return {
            "team": self.team,
            "batsman": self.batsman,
            "non_striker": self.non_striker,
            "bowler": self.bowler,
        }

    def validate_against(self, vocabs: dict[str, Vocabulary]) -> None:
        team_size = self.team[1] - self.team[0]
        player_size = self.batsman[1] - self.batsman[0]
        if vocabs["team"].size != team_size:
            raise LayoutMismatch(
                f"team vocabulary size {vocabs['team'].size} != layout block {team_size}"
            )
        if vocabs["player"].size != player_size:
            raise LayoutMismatch(
                f"player vocabulary size {vocabs['player'].size} != layout block {player_size}"
            )
        for name, rng in self.categorical_ranges().items():
            if name != "team" and rng[1] - rng[0] != player_size:
                raise LayoutMismatch(f"{name} block width differs from batsman block")

    def to_dict(self) -> dict:
        return {
            "layout_version": self.layout_version,
            "continuous": dict(self.continuous),
            "team": list(self.team),
            "batsman": list(self.batsman),
            "non_striker": list(self.non_striker),
            "bowler": list(self.bowler),
            "aug": dict(self.aug),
            "total_dim": self.total_dim,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureLayout":
        return cls(
            layout_version=obj["layout_version"],
            continuous=dict(obj["continuous"]),
            team=tuple(obj["team"]),
            batsman=tuple(obj["batsman"]),
            non_striker=tuple(obj["non_striker"]),
            bowler=tuple(obj["bowler"]),
            aug=dict(obj["aug"]),
            total_dim=obj["total_dim"],
        )


@dataclass(frozen=True)
class AugmentationInputs:
    """Optional extra signals written into dedicated feature slots.

    A disabled slot encodes as 0.0 in every row.  The pre-match probability
    is written only into ball 1's row; the chase target and first-innings
    wickets are written into every valid row.
    """

    prematch_prob: float | None = None
    target_score: int | None = None
    fi_wickets: int | None = None
    enable_prematch: bool = False
    enable_target: bool = False
    enable_wickets: bool = False

    def require_values(self) -> None:
        if self.enable_prematch and self.prematch_prob is None:
            raise ValueError("prematch slot enabled but no probability supplied")
        if self.enable_target and self.target_score is None:
            raise ValueError("target slot enabled but no target score supplied")
        if self.enable_wickets and self.fi_wickets is None:
            raise ValueError("wickets slot enabled but no wicket count supplied")


NO_AUGMENTATION = AugmentationInputs()


@dataclass
class LegalBall:
    """One legal delivery after wides/no-balls have been merged in."""

    over: int
    ball_in_over: int
    runs_off_bat: int
    extras: int
    wicket: int
    batting_team: str
    batsman: str
    non_striker: str
    bowler: str


@dataclass
class LegalizedInnings:
    balls: list[LegalBall]
    merged_wides: int = 0
    merged_noballs: int = 0
    truncated: int = 0
    dropped_orphans: int = 0

    @property
    def valid_length(self) -> int:
        return len(self.balls)


def _legal_from_delivery(d: DeliveryRecord) -> LegalBall:
    return LegalBall(
        over=d.over,
        ball_in_over=d.ball_in_over,
        runs_off_bat=d.runs_off_bat,
        extras=d.extras,
        wicket=d.wicket,
        batting_team=d.batting_team,
        batsman=d.batsman,
        non_striker=d.non_striker,
        bowler=d.bowler,
    )


def legalize_deliveries(deliveries: list[DeliveryRecord]) -> LegalizedInnings:
    """Collapse an ordered single-innings delivery list to legal balls.

    Wides and no-balls merge backward into the last legal ball of the same
    over; when they open an over they merge forward into the next legal ball
    (crossing an over boundary if the over never gets one).  Runs and extras
    accumulate on the carrier ball and wicket flags OR.  Output is truncated
    to 300 records; the truncation count is reported.
    """
    result = LegalizedInnings(balls=[])
    pending: LegalBall | None = None  # forward-merging illegal deliveries
    for d in deliveries:
        if d.extras_kind in ILLEGAL_KINDS:
            if d.extras_kind == "wide":
                result.merged_wides += 1
            else:
                result.merged_noballs += 1
            if result.balls and result.balls[-1].over == d.over:
                carrier = result.balls[-1]
                carrier.runs_off_bat += d.runs_off_bat
                carrier.extras += d.extras
                carrier.wicket |= d.wicket
            elif pending is None:
                pending = _legal_from_delivery(d)
            else:
                pending.runs_off_bat += d.runs_off_bat
                pending.extras += d.extras
                pending.wicket |= d.wicket
        else:
            ball = _legal_from_delivery(d)
            if pending is not None:
                ball.runs_off_bat += pending.runs_off_bat
                ball.extras += pending.extras
                ball.wicket |= pending.wicket
                pending = None
            result.balls.append(ball)
    if pending is not None:
        if result.balls:
            carrier = result.balls[-1]
            carrier.runs_off_bat += pending.runs_off_bat
            carrier.extras += pending.extras
            carrier.wicket |= pending.wicket
        else:
            result.dropped_orphans += 1
    if len(result.balls) > SEQUENCE_LENGTH:
        result.truncated = len(result.balls) - SEQUENCE_LENGTH
        result.balls = result.balls[:SEQUENCE_LENGTH]
    return result


@dataclass
class InningsSequence:
    """Model input: a 300-row feature matrix plus label, mask, and length."""

    features: np.ndarray  # (300, total_dim) float64
    valid_length: int
    loss_mask: np.ndarray  # (300,) float64 of 0/1
    label: int
    match_id: str


def ball_features(
    ball: LegalBall,
    t: int,
    layout: FeatureLayout,
    vocabs: dict[str, Vocabulary],
    aug: AugmentationInputs = NO_AUGMENTATION,
) -> np.ndarray:
    """Encode one legal ball (1-based timestep ``t``) into a feature row.

    This is the single source of truth for per-ball encoding: the offline
    innings encoder and the streaming server both call it, so their rows are
    bit-identical.
    """
    row = np.zeros(layout.total_dim, dtype=np.float64)
    c = layout.continuous
    row[c["ball_index"]] = t / SEQUENCE_LENGTH
    row[c["over"]] = min(ball.over / OVER_SCALE, CONTINUOUS_CEIL)
    row[c["ball_in_over"]] = min(ball.ball_in_over / BALL_IN_OVER_SCALE, CONTINUOUS_CEIL)
    row[c["runs_off_bat"]] = ball.runs_off_bat / RUNS_SCALE
    row[c["extras"]] = ball.extras / EXTRAS_SCALE
    row[c["wicket"]] = float(ball.wicket)
    team_vocab, player_vocab = vocabs["team"], vocabs["player"]
    row[layout.team[0] + team_vocab.index(ball.batting_team)] = 1.0
    row[layout.batsman[0] + player_vocab.index(ball.batsman)] = 1.0
    row[layout.non_striker[0] + player_vocab.index(ball.non_striker)] = 1.0
    row[layout.bowler[0] + player_vocab.index(ball.bowler)] = 1.0
    if aug.enable_prematch and t == 1:
        row[layout.aug["prematch_prob"]] = float(aug.prematch_prob)
    if aug.enable_target:
        row[layout.aug["target_norm"]] = aug.target_score / TARGET_SCALE
    if aug.enable_wickets:
        row[layout.aug["fi_wickets_norm"]] = aug.fi_wickets / WICKETS_SCALE
    return row


def encode_innings(
    m: MatchRecord,
    innings_no: int,
    vocabs: dict[str, Vocabulary],
    layout: FeatureLayout,
    aug: AugmentationInputs = NO_AUGMENTATION,
) -> InningsSequence:
    """Encode one innings of a match into an :class:`InningsSequence`.

    The label is 1 iff the batting team of the encoded innings won the match.
    """
    if innings_no not in (1, 2):
        raise UnknownInnings(f"innings_no must be 1 or 2, got {innings_no}")
    layout.validate_against(vocabs)
    aug.require_values()
    deliveries = m.innings_deliveries(innings_no)
    legalized = legalize_deliveries(deliveries)
    if legalized.valid_length == 0:
        raise UnknownInnings(f"{m.match_id}: innings {innings_no} has no legal deliveries")

    features = np.zeros((SEQUENCE_LENGTH, layout.total_dim), dtype=np.float64)
    for i, ball in enumerate(legalized.balls):
        features[i] = ball_features(ball, i + 1, layout, vocabs, aug)
    mask = np.zeros(SEQUENCE_LENGTH, dtype=np.float64)
    mask[: legalized.valid_length] = 1.0
    batting = legalized.balls[0].batting_team
    return InningsSequence(
        features=features,
        valid_length=legalized.valid_length,
        loss_mask=mask,
        label=int(m.winner == batting),
        match_id=m.match_id,
    )


def cumulative_transform(seq: InningsSequence, layout: FeatureLayout) -> InningsSequence:
    """Replace per-ball run/extras/wicket slots with normalized running sums.

    The runs slot becomes cumulative total runs (bat + extras) / 350, the
    extras slot cumulative extras / 75, the wicket slot cumulative wickets
    / 10.  Categorical and augmentation slots are untouched, as are padded
    rows.  Single application only; not idempotent.
    """
    c = layout.continuous
    L = seq.valid_length
    f = seq.features.copy()
    # per-ball counts are integers; recover them exactly before summing
    runs = np.rint(f[:L, c["runs_off_bat"]] * RUNS_SCALE)
    extras = np.rint(f[:L, c["extras"]] * EXTRAS_SCALE)
    wickets = np.rint(f[:L, c["wicket"]])
    f[:L, c["runs_off_bat"]] = np.cumsum(runs + extras) / TARGET_SCALE
    f[:L, c["extras"]] = np.cumsum(extras) / CUM_EXTRAS_SCALE
    f[:L, c["wicket"]] = np.cumsum(wickets) / WICKETS_SCALE
    return InningsSequence(
        features=f,
        valid_length=seq.valid_length,
        loss_mask=seq.loss_mask.copy(),
        label=seq.label,
        match_id=seq.match_id,
    )


def truncate_sequence(seq: InningsSequence, length: int) -> InningsSequence:
    """Prefix of an innings: rows past ``length`` zeroed, mask shortened.

    The prefix inherits the full-match label.
    """
    if not 1 <= length <= SEQUENCE_LENGTH:
        raise ValueError(f"prefix length must lie in 1..{SEQUENCE_LENGTH}, got {length}")
    length = min(length, seq.valid_length)
    f = seq.features.copy()
    f[length:] = 0.0
    mask = np.zeros(SEQUENCE_LENGTH, dtype=np.float64)
    mask[:length] = 1.0
    return InningsSequence(
        features=f,
        valid_length=length,
        loss_mask=mask,
        label=seq.label,
        match_id=seq.match_id,
    )


def sample_prefixes(seq: InningsSequence, count: int, rng_seed: int) -> list[int]:
    """Draw ``count`` prefix lengths uniformly from [1, valid_length]."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    return rng.integers(1, seq.valid_length + 1, size=count).tolist()


def default_augmentation(
    m: MatchRecord,
    enable_prematch: bool = False,
    enable_target: bool = False,
    enable_wickets: bool = False,
    prematch_prob: float | None = None,
) -> AugmentationInputs:
    """Augmentation values for a completed match: target = first-innings
    runs + 1, wickets from the first innings, probability from a pre-match
    model when enabled."""
    return AugmentationInputs(
        prematch_prob=prematch_prob,
        target_score=m.first_innings_runs + 1,
        fi_wickets=m.first_innings_wickets,
        enable_prematch=enable_prematch,
        enable_target=enable_target,
        enable_wickets=enable_wickets,
    )


def encode_corpus(
    matches: list[MatchRecord],
    vocabs: dict[str, Vocabulary],
    layout: FeatureLayout,
    innings_no: int = 2,
    enable_prematch: bool = False,
    enable_target: bool = False,
    enable_wickets: bool = False,
    prematch_probs: dict[str, float] | None = None,
) -> list[InningsSequence]:
    """Encode one innings of every match with shared augmentation flags.

    ``prematch_probs`` maps match_id to the pre-match win probability and is
    required when the prematch slot is enabled.
    """
    out = []
    for m in matches:
        prob = None
        if enable_prematch:
            if prematch_probs is None or m.match_id not in prematch_probs:
                raise ValueError(f"{m.match_id}: prematch slot enabled but no probability given")
            prob = prematch_probs[m.match_id]
        aug = default_augmentation(
            m,
            enable_prematch=enable_prematch,
            enable_target=enable_target,
            enable_wickets=enable_wickets,
            prematch_prob=prob,
        )
        out.append(encode_innings(m, innings_no, vocabs, layout, aug))
    return out
