"""Local adapters package."""
