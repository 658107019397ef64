"""Tabular layered-MDP library and the state-free reduction driver."""
