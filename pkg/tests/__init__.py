"""Tests for the delay_average package."""
