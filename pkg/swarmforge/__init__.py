"""
SwarmForge: grouped tensor-form particle swarms, self-evolving hyper-parameters
and real-time dynamic path planning.
"""

__version__ = "0.1.0"
