"""
hft_kinetics: trend-following trader model of a high-frequency FX market,
its kinetic theory, and the statistics used to compare the two
"""

__version__ = '0.1.0'
