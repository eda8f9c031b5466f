"""Guarded concurrent game models with payoffs.

Library and CLI for building game models whose moves are gated by per-agent
guards over running utilities, simulating them, and checking quantitative
strategy-logic properties with several engines.
"""

__version__ = "0.1.0"
