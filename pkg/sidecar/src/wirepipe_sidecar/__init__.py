"""Batch encoder: neural sentence embeddings in wirepipe's binary format.

This package never imports wirepipe. The only contracts shared with the
core are files: the encode-input JSONL it reads and the NWEMB1 embedding
file it writes.
"""

__version__ = "0.1.0"


class SidecarError(Exception):
    """Any failure the CLI should report; ``stage`` names where it happened."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage
