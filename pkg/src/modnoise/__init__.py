"""Optimal modular additive noise for differentially private discrete queries."""
