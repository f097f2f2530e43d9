"""Evaluation harness for mobile GUI agents."""
