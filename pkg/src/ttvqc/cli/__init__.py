"""Batch experiment runner."""
