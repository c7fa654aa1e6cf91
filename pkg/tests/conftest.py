import pytest

from crickwin.encode import FeatureLayout, build_vocabulary
from crickwin.ingest import parse_match_file
from crickwin.synth import synthetic_corpus

# A hand-written corpus file in the documented dialect.  Innings 1 scores
# 1+4+0+2 = 7 runs; innings 2 contains a no-ball and a wide for the
# legalization paths.
FIXTURE_CSV = """\
version,2
info,team,India
info,team,Australia
info,gender,male
info,season,2015
info,date,2015-02-15
info,venue,Melbourne Cricket Ground
info,city,Melbourne
info,toss_winner,India
info,toss_decision,bat
info,winner,Australia
ball,1,0.1,India,Rohit,Dhawan,Starc,1,0,,
ball,1,0.2,India,Dhawan,Rohit,Starc,4,0,,
ball,1,0.3,India,Dhawan,Rohit,Starc,0,0,,caught
ball,1,0.4,India,Kohli,Rohit,Starc,2,0,,
ball,2,0.1,Australia,Warner,Finch,Shami,0,0,,
ball,2,0.2,Australia,Warner,Finch,Shami,1,1,noball,
ball,2,0.3,Australia,Finch,Warner,Shami,4,0,,
ball,2,0.4,Australia,Finch,Warner,Shami,0,1,wide,
ball,2,0.5,Australia,Finch,Warner,Shami,6,0,,
ball,2,0.6,Australia,Finch,Warner,Shami,0,0,,bowled
ball,2,0.7,Australia,Smith,Warner,Shami,2,0,,
"""


@pytest.fixture
def fixture_match():
    return parse_match_file(FIXTURE_CSV, "fixture-001")


@pytest.fixture(scope="session")
def small_synth_corpus():
    return synthetic_corpus(n_matches=30, seed=5)


@pytest.fixture(scope="session")
def small_vocabs_layout(small_synth_corpus):
    vocabs = {
        "team": build_vocabulary(small_synth_corpus, "team", 1, 50),
        "player": build_vocabulary(small_synth_corpus, "player", 1, 100),
    }
    layout = FeatureLayout.build(vocabs["team"].size, vocabs["player"].size)
    return vocabs, layout
