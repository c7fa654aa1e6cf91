"""Ball-by-ball cricket win-probability modeling.

Subpackage map: :mod:`crickwin.ingest` parses and splits the corpus,
:mod:`crickwin.encode` turns innings into fixed-length feature matrices,
:mod:`crickwin.nn` is the numerical core, :mod:`crickwin.model` composes and
trains the sequence-model variants, :mod:`crickwin.prematch` holds the
boosted pre-match classifiers, :mod:`crickwin.evaluate` builds accuracy
reports, :mod:`crickwin.serve` streams live inference over HTTP, and
:mod:`crickwin.cli` ties it together.
"""

__version__ = "0.1.0"
