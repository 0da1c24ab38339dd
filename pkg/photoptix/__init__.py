"""
PhotOptix - exact photon-counting statistics for lossy linear multiports
with partially distinguishable sources.
"""

__version__ = "0.1.0"
