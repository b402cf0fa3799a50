"""Exact toolkit that turns members of minor/Pfaffian ideals into small
depth-three circuits with oracle gates for determinant, Pfaffian and
iterated matrix multiplication targets."""

__version__ = "0.1.0"
