"""Tests for application layer services."""
