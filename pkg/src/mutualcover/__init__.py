"""Mutual covering and joint-distribution simulation on finite alphabets.

All information quantities are in nats.
"""
__version__ = "0.1.0"
