"""moose: hypothesis induction over raw web corpora.

Find research backgrounds in corpus chunks, retrieve inspiration passages by
title, propose hypotheses, refine them with clarity/reality/novelty feedback,
steer title selection across rounds, and judge the results with a 5-point
rubric harness.
"""

__version__ = "0.1.0"
