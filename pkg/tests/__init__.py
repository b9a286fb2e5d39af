"""Tests for the evdiag package."""
