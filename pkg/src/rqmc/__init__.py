"""Randomized quasi-Monte Carlo with scrambled digital nets."""
