"""Repository-level tests."""
