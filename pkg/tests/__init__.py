"""Test suite for fusedet."""
