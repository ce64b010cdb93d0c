"""Event coreference search: retriever-reader pipeline over passage corpora.

Given a passage with a marked event mention (the query), retrieve the
passages whose event mentions refer to the same real-world event, and
extract the coreferring mention span from each. Subpackages cover the
corpus model, tokenization, trainable toy encoders with hand-derived
gradients, dense and BM25 retrieval, cross-encoder readers, evaluation
metrics, and an HTTP search service.
"""

__version__ = "0.1.0"
