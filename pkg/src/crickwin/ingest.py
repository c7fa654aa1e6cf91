"""Ball-by-ball ODI corpus handling: parse, validate, filter, and split.

Corpus files are per-match CSVs with two kinds of rows.  ``info`` rows hold
match metadata as key/value pairs (``info,team,India``); ``ball`` rows hold
one delivery each in a fixed column order::

    ball,<innings>,<over.ball>,<batting team>,<batsman>,<non striker>,
         <bowler>,<runs off bat>,<extras>,<extras kind>,<wicket kind>

Rows with any other leading tag (``version`` headers and the like) are
skipped.  ``over.ball`` is a dotted pair, not a decimal: "49.6" is over 49,
ball 6, and "0.10" is the tenth delivery of the first over.

Outcome tagging: a ``method`` metadata row (rain rules, awarded matches)
marks the match ``dl_adjusted``; an ``outcome`` row of ``tie`` or
``no result`` marks it accordingly; otherwise a ``winner`` row makes it
``normal``.  A file with neither winner nor outcome is rejected.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .jsonio import canonical_dumps, load_path

MANIFEST_FORMAT_VERSION = 1

OUTCOME_KINDS = ("normal", "tie", "no_result", "dl_adjusted")
EXTRAS_KINDS = ("none", "wide", "noball", "bye", "legbye", "penalty")
#: extras kinds that do not count as a legal delivery
ILLEGAL_KINDS = ("wide", "noball")

_EXTRAS_ALIASES = {
    "": "none",
    "wides": "wide",
    "noballs": "noball",
    "byes": "bye",
    "legbyes": "legbye",
}

_BALL_ROW_WIDTH = 11


class IngestError(Exception):
    """Base class for corpus-level failures."""


class MalformedRow(IngestError):
    pass


class MissingMetadata(IngestError):
    pass


class EmptyInnings(IngestError):
    pass


class TooFewMatches(IngestError):
    pass


@dataclass
class DeliveryRecord:
    """One delivery as recorded in the corpus (legal or not)."""

    innings_no: int
    over: int
    ball_in_over: int
    batting_team: str
    batsman: str
    non_striker: str
    bowler: str
    runs_off_bat: int
    extras: int
    extras_kind: str = "none"
    wicket: int = 0


@dataclass
class MatchRecord:
    """A parsed match: metadata, derived first-innings totals, deliveries."""

    match_id: str
    teams: tuple[str, str]
    date: str
    venue: str
    city: str | None
    season: str
    gender: str
    toss_winner: str
    toss_decision: str
    winner: str | None
    outcome_kind: str
    first_innings_runs: int
    first_innings_wickets: int
    deliveries: list[DeliveryRecord] = field(default_factory=list)

    def innings_deliveries(self, innings_no: int) -> list[DeliveryRecord]:
        return [d for d in self.deliveries if d.innings_no == innings_no]

    def batting_team_of(self, innings_no: int) -> str | None:
        for d in self.deliveries:
            if d.innings_no == innings_no:
                return d.batting_team
        return None

    def chasing_team(self) -> str | None:
        """Team batting second; falls back to the non-opening team."""
        second = self.batting_team_of(2)
        if second is not None:
            return second
        first = self.batting_team_of(1)
        if first is None:
            return None
        others = [t for t in self.teams if t != first]
        return others[0] if others else None


@dataclass
class FilterPolicy:
    """Which matches survive into the modeling corpus."""

    retain_outcomes: tuple[str, ...] = ("normal",)
    min_second_innings_deliveries: int = 6


@dataclass
class DatasetSplit:
    train_ids: list[str]
    test_ids: list[str]
    seed: int
    ratio: float


def _parse_int(text: str, line_no: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedRow(f"line {line_no}: unparsable {what} {text!r}") from None


def _parse_ball_row(row: list[str], line_no: int) -> DeliveryRecord:
    if len(row) != _BALL_ROW_WIDTH:
        raise MalformedRow(
            f"line {line_no}: ball row has {len(row)} columns, expected {_BALL_ROW_WIDTH}"
        )
    innings_no = _parse_int(row[1].strip(), line_no, "innings number")
    over_ball = row[2].strip().split(".")
    if len(over_ball) != 2:
        raise MalformedRow(f"line {line_no}: over.ball field {row[2]!r} is not a dotted pair")
    over = _parse_int(over_ball[0], line_no, "over")
    ball_in_over = _parse_int(over_ball[1], line_no, "ball")
    runs_off_bat = _parse_int(row[7].strip(), line_no, "runs_off_bat")
    extras = _parse_int(row[8].strip(), line_no, "extras")
    kind_raw = row[9].strip().lower()
    extras_kind = _EXTRAS_ALIASES.get(kind_raw, kind_raw)
    wicket_kind = row[10].strip()
    return DeliveryRecord(
        innings_no=innings_no,
        over=over,
        ball_in_over=ball_in_over,
        batting_team=row[3].strip(),
        batsman=row[4].strip(),
        non_striker=row[5].strip(),
        bowler=row[6].strip(),
        runs_off_bat=runs_off_bat,
        extras=extras,
        extras_kind=extras_kind,
        wicket=1 if wicket_kind else 0,
    )


def parse_match_file(content: str, match_id: str) -> MatchRecord:
    """Parse one corpus CSV into a :class:`MatchRecord`.

    Derived first-innings totals are populated from the delivery rows.
    Unknown metadata keys are ignored; repeated keys keep their first value.
    """
    teams: list[str] = []
    meta: dict[str, str] = {}
    deliveries: list[DeliveryRecord] = []

    reader = csv.reader(io.StringIO(content))
    for line_no, row in enumerate(reader, start=1):
        if not row or not row[0].strip():
            continue
        tag = row[0].strip()
        if tag == "info":
            if len(row) < 3:
                raise MalformedRow(f"line {line_no}: info row needs a key and a value")
            key, value = row[1].strip(), row[2].strip()
            if key == "team":
                teams.append(value)
            else:
                meta.setdefault(key, value)
        elif tag == "ball":
            deliveries.append(_parse_ball_row(row, line_no))
        # any other tag: skip

    if len(teams) != 2:
        raise MissingMetadata(f"{match_id}: expected 2 team rows, found {len(teams)}")
    if not deliveries:
        raise EmptyInnings(f"{match_id}: no delivery rows")

    winner = meta.get("winner")
    outcome = meta.get("outcome", "").strip().lower().replace(" ", "_")
    if winner is None and not outcome:
        raise MissingMetadata(f"{match_id}: neither winner nor outcome metadata present")

    if "method" in meta:
        outcome_kind = "dl_adjusted"
    elif outcome in ("tie", "no_result"):
        outcome_kind = outcome
        winner = None
    else:
        outcome_kind = "normal"

    first = [d for d in deliveries if d.innings_no == 1]
    first_runs = sum(d.runs_off_bat + d.extras for d in first)
    first_wkts = min(10, sum(d.wicket for d in first))

    return MatchRecord(
        match_id=match_id,
        teams=(teams[0], teams[1]),
        date=meta.get("date", ""),
        venue=meta.get("venue", ""),
        city=meta.get("city") or None,
        season=meta.get("season", ""),
        gender=meta.get("gender", ""),
        toss_winner=meta.get("toss_winner", ""),
        toss_decision=meta.get("toss_decision", ""),
        winner=winner,
        outcome_kind=outcome_kind,
        first_innings_runs=first_runs,
        first_innings_wickets=first_wkts,
        deliveries=deliveries,
    )


def validate_match(m: MatchRecord) -> list[str]:
    """Return human-readable invariant violations; empty means clean."""
    violations: list[str] = []
    if m.winner is not None and m.winner not in m.teams:
        violations.append(f"winner: {m.winner!r} is not one of teams {m.teams}")
    if m.outcome_kind not in OUTCOME_KINDS:
        violations.append(f"outcome_kind: {m.outcome_kind!r} not in {OUTCOME_KINDS}")
    if m.toss_decision and m.toss_decision not in ("bat", "field"):
        violations.append(f"toss_decision: {m.toss_decision!r} not 'bat' or 'field'")
    if not 0 <= m.first_innings_wickets <= 10:
        violations.append(f"first_innings_wickets: {m.first_innings_wickets} outside 0..10")

    prev_key = None
    for i, d in enumerate(m.deliveries):
        where = f"deliveries[{i}]"
        if d.runs_off_bat < 0:
            violations.append(f"{where}.runs_off_bat: negative")
        if d.extras < 0:
            violations.append(f"{where}.extras: negative")
        if d.innings_no not in (1, 2):
            violations.append(f"{where}.innings_no: {d.innings_no} not in {{1,2}}")
        if not 0 <= d.over <= 49:
            violations.append(f"{where}.over: {d.over} outside 0..49")
        if d.ball_in_over < 1:
            violations.append(f"{where}.ball_in_over: {d.ball_in_over} < 1")
        if d.wicket not in (0, 1):
            violations.append(f"{where}.wicket: {d.wicket} not a 0/1 flag")
        if d.extras_kind not in EXTRAS_KINDS:
            violations.append(f"{where}.extras_kind: {d.extras_kind!r} not in {EXTRAS_KINDS}")
        key = (d.innings_no, d.over, d.ball_in_over)
        if prev_key is not None and key < prev_key:
            violations.append(
                f"{where}: deliveries not non-decreasing in (innings, over, ball): "
                f"{key} after {prev_key}"
            )
        prev_key = key

    recomputed = sum(d.runs_off_bat + d.extras for d in m.deliveries if d.innings_no == 1)
    if recomputed != m.first_innings_runs:
        violations.append(
            f"first_innings_runs: stored {m.first_innings_runs} != recomputed {recomputed}"
        )
    return violations


def filter_corpus(
    matches: list[MatchRecord], policy: FilterPolicy | None = None
) -> list[MatchRecord]:
    """Keep matches whose outcome the policy retains and whose second innings
    has enough deliveries to model.  The default policy keeps only normally
    decided matches, so every retained match has a definite winner."""
    policy = policy or FilterPolicy()
    kept = []
    for m in matches:
        if m.outcome_kind not in policy.retain_outcomes:
            continue
        if len(m.innings_deliveries(2)) < policy.min_second_innings_deliveries:
            continue
        if m.winner is None and m.outcome_kind not in ("tie", "no_result"):
            continue
        kept.append(m)
    return kept


def split_corpus(matches: list[MatchRecord], ratio: float, seed: int) -> DatasetSplit:
    """Deterministic match-level train/test split.

    The split is a pure function of the sorted match ids, the ratio, and the
    seed.  Train size is ratio*N rounded half-up, clamped so both sides stay
    non-empty.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0,1), got {ratio}")
    ids = sorted(m.match_id for m in matches)
    n = len(ids)
    if n < 2:
        raise TooFewMatches(f"need at least 2 matches to split, got {n}")
    k = int(math.floor(ratio * n + 0.5))
    k = min(max(k, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train = sorted(ids[i] for i in perm[:k])
    test = sorted(ids[i] for i in perm[k:])
    return DatasetSplit(train_ids=train, test_ids=test, seed=seed, ratio=ratio)


# --------------------------------------------------------------------------
# serialization: canonical manifest JSON and fixture CSV writing
# --------------------------------------------------------------------------


def delivery_to_dict(d: DeliveryRecord) -> dict:
    return {
        "innings_no": d.innings_no,
        "over": d.over,
        "ball_in_over": d.ball_in_over,
        "batting_team": d.batting_team,
        "batsman": d.batsman,
        "non_striker": d.non_striker,
        "bowler": d.bowler,
        "runs_off_bat": d.runs_off_bat,
        "extras": d.extras,
        "extras_kind": d.extras_kind,
        "wicket": d.wicket,
    }


def delivery_from_dict(obj: dict) -> DeliveryRecord:
    return DeliveryRecord(**obj)


def match_to_dict(m: MatchRecord) -> dict:
    return {
        "match_id": m.match_id,
        "teams": list(m.teams),
        "date": m.date,
        "venue": m.venue,
        "city": m.city,
        "season": m.season,
        "gender": m.gender,
        "toss_winner": m.toss_winner,
        "toss_decision": m.toss_decision,
        "winner": m.winner,
        "outcome_kind": m.outcome_kind,
        "first_innings_runs": m.first_innings_runs,
        "first_innings_wickets": m.first_innings_wickets,
        "deliveries": [delivery_to_dict(d) for d in m.deliveries],
    }


def match_from_dict(obj: dict) -> MatchRecord:
    fields = dict(obj)
    fields["teams"] = tuple(fields["teams"])
    fields["deliveries"] = [delivery_from_dict(d) for d in fields["deliveries"]]
    return MatchRecord(**fields)


def split_to_dict(s: DatasetSplit) -> dict:
    return {
        "train_ids": list(s.train_ids),
        "test_ids": list(s.test_ids),
        "seed": s.seed,
        "ratio": s.ratio,
    }


def split_from_dict(obj: dict) -> DatasetSplit:
    return DatasetSplit(
        train_ids=list(obj["train_ids"]),
        test_ids=list(obj["test_ids"]),
        seed=obj["seed"],
        ratio=obj["ratio"],
    )


def manifest_to_dict(
    matches: list[MatchRecord], split: DatasetSplit, provenance: dict | None = None
) -> dict:
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "matches": [match_to_dict(m) for m in matches],
        "split": split_to_dict(split),
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def write_manifest(path, matches, split, provenance=None) -> None:
    Path(path).write_text(
        canonical_dumps(manifest_to_dict(matches, split, provenance)) + "\n", encoding="utf-8"
    )


def load_manifest(path) -> tuple[list[MatchRecord], DatasetSplit]:
    doc = load_path(path)
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise IngestError(f"unsupported manifest format_version {doc.get('format_version')!r}")
    matches = [match_from_dict(m) for m in doc["matches"]]
    return matches, split_from_dict(doc["split"])


def load_corpus_dir(path) -> list[MatchRecord]:
    """Parse every ``*.csv`` in a directory, sorted by filename."""
    matches = []
    for f in sorted(Path(path).glob("*.csv")):
        matches.append(parse_match_file(f.read_text(encoding="utf-8"), f.stem))
    return matches


def match_to_csv(m: MatchRecord) -> str:
    """Render a match back into the corpus CSV dialect (fixtures, demos)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for team in m.teams:
        w.writerow(["info", "team", team])
    if m.gender:
        w.writerow(["info", "gender", m.gender])
    if m.season:
        w.writerow(["info", "season", m.season])
    if m.date:
        w.writerow(["info", "date", m.date])
    if m.venue:
        w.writerow(["info", "venue", m.venue])
    if m.city:
        w.writerow(["info", "city", m.city])
    if m.toss_winner:
        w.writerow(["info", "toss_winner", m.toss_winner])
    if m.toss_decision:
        w.writerow(["info", "toss_decision", m.toss_decision])
    if m.outcome_kind == "tie":
        w.writerow(["info", "outcome", "tie"])
    elif m.outcome_kind == "no_result":
        w.writerow(["info", "outcome", "no result"])
    else:
        if m.outcome_kind == "dl_adjusted":
            w.writerow(["info", "method", "D/L"])
        if m.winner is not None:
            w.writerow(["info", "winner", m.winner])
    for d in m.deliveries:
        w.writerow(
            [
                "ball",
                d.innings_no,
                f"{d.over}.{d.ball_in_over}",
                d.batting_team,
                d.batsman,
                d.non_striker,
                d.bowler,
                d.runs_off_bat,
                d.extras,
                "" if d.extras_kind == "none" else d.extras_kind,
                "wicket" if d.wicket else "",
            ]
        )
    return out.getvalue()


def write_corpus_dir(matches: list[MatchRecord], path) -> None:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    for m in matches:
        (directory / f"{m.match_id}.csv").write_text(match_to_csv(m), encoding="utf-8")


def team_match_counts(matches: list[MatchRecord]) -> Counter:
    """Matches played per team, the outlier-removal statistic for vocabularies."""
    counts: Counter = Counter()
    for m in matches:
        for t in set(m.teams):
            counts[t] += 1
    return counts
