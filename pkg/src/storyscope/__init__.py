"""storyscope: measuring and detecting storytelling in online-community text.

Library layout:

- :mod:`storyscope.corpus` — documents, span annotations, sampling, splits
- :mod:`storyscope.textproc` — tokenization, sentences, verb/pronoun/concreteness measures
- :mod:`storyscope.features` — per-document measure vectors and the trigram LM
- :mod:`storyscope.stats` — kappa, Welch tests, Holm, bootstrap, correlation
- :mod:`storyscope.detector` — TF-IDF + linear classifier, baselines, evaluation
- :mod:`storyscope.community` — story rates, distinctiveness, post/comment ratios
- :mod:`storyscope.annotation_service` — HTTP annotation backend
- :mod:`storyscope.synth` — planted-effect synthetic corpus
- :mod:`storyscope.cli` — the ``storyscope`` command
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CategoryMap,
    Corpus,
    CorpusError,
    Document,
    LabeledDoc,
    SpanAnnotation,
    load_annotations,
    load_corpus,
    union_story_labels,
)
