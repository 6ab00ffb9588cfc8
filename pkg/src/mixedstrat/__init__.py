"""Pure- and mixed-strategy evolutionary algorithms for the 0-1 knapsack problem,
with exact Markov-chain analysis of (1+1) variants on small instances."""

__version__ = "0.1.0"
