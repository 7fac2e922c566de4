"""Local file-backed adapters."""
