import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crickwin.ingest import (
    EmptyInnings,
    FilterPolicy,
    MalformedRow,
    MissingMetadata,
    TooFewMatches,
    filter_corpus,
    load_manifest,
    match_from_dict,
    match_to_csv,
    match_to_dict,
    parse_match_file,
    split_corpus,
    validate_match,
    write_manifest,
)
from crickwin.synth import synthetic_corpus


class TestParse:
    def test_first_innings_runs_hand_sum(self, fixture_match):
        # 1 + 4 + 0 + 2, summed by hand over the fixture rows
        assert fixture_match.first_innings_runs == 7
        assert fixture_match.first_innings_wickets == 1

    def test_metadata_fields(self, fixture_match):
        assert fixture_match.teams == ("India", "Australia")
        assert fixture_match.winner == "Australia"
        assert fixture_match.outcome_kind == "normal"
        assert fixture_match.city == "Melbourne"
        assert fixture_match.toss_decision == "bat"

    def test_zero_delivery_rows_is_empty_innings(self):
        content = "info,team,A\ninfo,team,B\ninfo,winner,A\n"
        with pytest.raises(EmptyInnings):
            parse_match_file(content, "m")

    def test_over_ball_is_a_dotted_pair(self):
        content = (
            "info,team,A\ninfo,team,B\ninfo,winner,A\n"
            "ball,1,49.6,A,p1,p2,p3,0,0,,\n"
        )
        m = parse_match_file(content, "m")
        assert m.deliveries[0].over == 49
        assert m.deliveries[0].ball_in_over == 6

    def test_tenth_ball_of_over_not_parsed_as_decimal(self):
        content = (
            "info,team,A\ninfo,team,B\ninfo,winner,A\n"
            "ball,1,0.10,A,p1,p2,p3,0,0,,\n"
        )
        m = parse_match_file(content, "m")
        assert m.deliveries[0].over == 0
        assert m.deliveries[0].ball_in_over == 10

    def test_wrong_column_count_names_line(self):
        content = "info,team,A\ninfo,team,B\ninfo,winner,A\nball,1,0.1,A,p1\n"
        with pytest.raises(MalformedRow, match="line 4"):
            parse_match_file(content, "m")

    def test_unparsable_number_names_line(self):
        content = (
            "info,team,A\ninfo,team,B\ninfo,winner,A\n"
            "ball,1,0.1,A,p1,p2,p3,lots,0,,\n"
        )
        with pytest.raises(MalformedRow, match="line 4"):
            parse_match_file(content, "m")

    def test_missing_teams(self):
        content = "info,team,A\ninfo,winner,A\nball,1,0.1,A,p1,p2,p3,0,0,,\n"
        with pytest.raises(MissingMetadata):
            parse_match_file(content, "m")

    def test_missing_outcome(self):
        content = "info,team,A\ninfo,team,B\nball,1,0.1,A,p1,p2,p3,0,0,,\n"
        with pytest.raises(MissingMetadata):
            parse_match_file(content, "m")

    def test_tie_and_no_result_and_method(self):
        base = "info,team,A\ninfo,team,B\n{}ball,1,0.1,A,p1,p2,p3,0,0,,\n"
        tie = parse_match_file(base.format("info,outcome,tie\n"), "m")
        assert tie.outcome_kind == "tie" and tie.winner is None
        nr = parse_match_file(base.format("info,outcome,no result\n"), "m")
        assert nr.outcome_kind == "no_result"
        dl = parse_match_file(
            base.format("info,winner,A\ninfo,method,D/L\n"), "m"
        )
        assert dl.outcome_kind == "dl_adjusted" and dl.winner == "A"

    def test_unknown_metadata_ignored(self):
        content = (
            "info,team,A\ninfo,team,B\ninfo,winner,A\ninfo,umpire,Somebody\n"
            "ball,1,0.1,A,p1,p2,p3,0,0,,\n"
        )
        parse_match_file(content, "m")  # should not raise

    def test_multiwicket_collapses_to_flag(self, fixture_match):
        assert all(d.wicket in (0, 1) for d in fixture_match.deliveries)


class TestValidate:
    def test_clean_fixture(self, fixture_match):
        assert validate_match(fixture_match) == []

    def test_winner_not_in_teams(self, fixture_match):
        bad = dataclasses.replace(fixture_match, winner="Mars")
        violations = validate_match(bad)
        assert len(violations) == 1
        assert "winner" in violations[0]

    def test_out_of_order_deliveries(self, fixture_match):
        bad = dataclasses.replace(fixture_match, deliveries=list(fixture_match.deliveries))
        bad.deliveries[0], bad.deliveries[1] = bad.deliveries[1], bad.deliveries[0]
        violations = validate_match(bad)
        assert any("non-decreasing" in v for v in violations)

    def test_first_innings_sum_mismatch(self, fixture_match):
        bad = dataclasses.replace(fixture_match, first_innings_runs=99)
        assert any("first_innings_runs" in v for v in validate_match(bad))


class TestFilter:
    def _mk(self, match, outcome, winner):
        return dataclasses.replace(match, outcome_kind=outcome, winner=winner)

    def test_default_policy_keeps_only_normal(self, fixture_match):
        corpus = [
            self._mk(fixture_match, "normal", "Australia"),
            self._mk(fixture_match, "tie", None),
            self._mk(fixture_match, "no_result", None),
            self._mk(fixture_match, "dl_adjusted", "India"),
        ]
        kept = filter_corpus(corpus)
        assert [m.outcome_kind for m in kept] == ["normal"]
        assert all(m.winner is not None for m in kept)

    def test_policy_retaining_ties(self, fixture_match):
        corpus = [self._mk(fixture_match, "tie", None)]
        kept = filter_corpus(corpus, FilterPolicy(retain_outcomes=("normal", "tie")))
        assert len(kept) == 1

    def test_short_second_innings_dropped(self, fixture_match):
        short = dataclasses.replace(
            fixture_match,
            deliveries=[d for d in fixture_match.deliveries if d.innings_no == 1]
            + [d for d in fixture_match.deliveries if d.innings_no == 2][:3],
        )
        assert filter_corpus([short]) == []
        kept = filter_corpus([short], FilterPolicy(min_second_innings_deliveries=2))
        assert len(kept) == 1


class TestSplit:
    def test_cardinality(self):
        matches = synthetic_corpus(n_matches=10, seed=1)
        split = split_corpus(matches, 0.8, seed=7)
        assert len(split.train_ids) == 8
        assert len(split.test_ids) == 2
        assert not set(split.train_ids) & set(split.test_ids)

    def test_deterministic(self):
        matches = synthetic_corpus(n_matches=10, seed=1)
        a = split_corpus(matches, 0.8, seed=7)
        b = split_corpus(matches, 0.8, seed=7)
        assert a == b

    def test_different_seeds_differ(self):
        matches = synthetic_corpus(n_matches=100, seed=1)
        a = split_corpus(matches, 0.8, seed=7)
        b = split_corpus(matches, 0.8, seed=8)
        assert a.train_ids != b.train_ids

    def test_too_few(self):
        matches = synthetic_corpus(n_matches=1, seed=1)
        with pytest.raises(TooFewMatches):
            split_corpus(matches, 0.8, seed=7)

    def test_bad_ratio(self):
        matches = synthetic_corpus(n_matches=4, seed=1)
        with pytest.raises(ValueError):
            split_corpus(matches, 1.2, seed=7)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(2, 40), ratio=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
    def test_partition_property(self, n, ratio, seed):
        matches = synthetic_corpus(n_matches=n, seed=2)
        split = split_corpus(matches, ratio, seed)
        ids = sorted(m.match_id for m in matches)
        assert sorted(split.train_ids + split.test_ids) == ids
        assert not set(split.train_ids) & set(split.test_ids)
        assert len(split.train_ids) >= 1 and len(split.test_ids) >= 1


class TestRoundTrips:
    def test_json_round_trip(self, fixture_match):
        assert match_from_dict(match_to_dict(fixture_match)) == fixture_match

    def test_csv_round_trip(self, fixture_match):
        reparsed = parse_match_file(match_to_csv(fixture_match), fixture_match.match_id)
        assert reparsed == fixture_match

    def test_manifest_round_trip(self, tmp_path):
        matches = synthetic_corpus(n_matches=4, seed=3)
        split = split_corpus(matches, 0.5, seed=1)
        path = tmp_path / "manifest.json"
        write_manifest(path, matches, split)
        loaded, loaded_split = load_manifest(path)
        assert loaded == matches
        assert loaded_split == split

    def test_conservation_on_synthetic(self, small_synth_corpus):
        for m in small_synth_corpus:
            assert validate_match(m) == []
