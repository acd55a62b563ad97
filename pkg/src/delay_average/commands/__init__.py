"""Command modules for the dav CLI."""
