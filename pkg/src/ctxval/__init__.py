"""Contextual values for generalized measurements."""
