"""Model checker for progress conditions of shared-memory read/write algorithms."""

from __future__ import annotations

__version__ = "0.1.0"
