"""Service placement and migration for MEC-enabled vehicular networks.

Exact optimal schedules (dynamic programming, brute force, LP export) and
multi-agent double-DQN placement policies over a simulated highway.
"""

__version__ = "0.1.0"
