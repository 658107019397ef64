"""Experiment harness and read-only results service for state-free RL runs."""
