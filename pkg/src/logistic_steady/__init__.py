"""
Positive steady states of logistic equations with harvesting on radial domains.
"""

__version__ = "0.1.0"
