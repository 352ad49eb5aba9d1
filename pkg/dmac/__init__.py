"""
DMACPipe - Dynamic Mode Adaptive Control simulator.

*DMACPipe* is a set of Python routines for online identification of linear models with
matrix recursive least squares, synthesis of tracking controllers with integral action from
the identified models, and closed-loop sampled-data simulation of benchmark plants under
such adaptive control, intended for quick experiments as well as for parameter sweeps.
"""
