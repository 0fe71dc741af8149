"""Donation trees with claimed sums, donor path checks, and detection analysis."""
