"""rarefind: iterative human-in-the-loop discovery of rare narrative classes.

Pipeline stages: ingest complaint CSVs, proximity-match keyword lexicons,
embed narratives as unit vectors, cluster them spherically, sample the
reference-dense clusters for double review, fold confirmed items back into
the reference set, and explain what each cluster picked up.
"""

__version__ = "0.1.0"
