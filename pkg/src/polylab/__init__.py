"""Partition-and-vote lab: forests, ReLU networks, their polytope partitions,
and a small-sample benchmark harness."""

__version__ = "0.1.0"
