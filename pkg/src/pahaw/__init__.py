"""Handwriting-based Parkinson's disease screening pipeline.

Stages: ingest (:mod:`cohort_io`), signal preparation, kinematic and
pressure features, subject-by-feature matrices, statistical selection,
classifiers, cross-validated evaluation, and a synthetic cohort generator.
"""

__version__ = "0.1.0"
