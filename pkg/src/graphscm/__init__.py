"""Causal-structure learning for heterogeneous graph node classification.

The package builds schema-level variables from a typed graph, fits a
structural causal model (a trainable DAG plus assignment networks) over
them under a differentiable acyclicity penalty, predicts node labels
through the learned structure, generates i.i.d and biased o.o.d splits,
and exports trimmed causal diagrams.
"""

__version__ = "0.1.0"
