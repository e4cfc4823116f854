"""Deterministic FANET simulator and OLSR/P-OLSR protocol library.

Implements link-quality (ETX) and speed-weighted (P-OLSR) routing metrics,
bit-exact Hello/TC codecs for both protocol variants, UAV mobility models,
a distance-driven channel, and a seeded discrete-event engine that measures
per-second datagram loss, goodput and outage time.
"""

__version__ = "0.1.0"
