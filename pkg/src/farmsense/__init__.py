"""Sensor-grounded farm advisory toolkit.

Simulated soil/climate telemetry flows through a buffering gateway into a
farm datastore; a chained-prompt pipeline with pluggable model backends
turns chat messages and live readings into cited, multilingual
recommendations and proactive alerts; an evaluation harness scores the
whole loop.
"""

__version__ = "0.1.0"
