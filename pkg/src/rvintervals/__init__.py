"""Return-interval statistics of high-frequency volatility.

Volatility construction from ticks, threshold return intervals, two-sample KS
scaling tests, stretched-exponential fits with bootstrap goodness of fit,
conditional-PDF memory diagnostics and DFA with crossover detection.
"""

__version__ = "0.1.0"
