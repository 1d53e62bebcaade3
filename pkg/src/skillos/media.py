"""File media-kind classification shared by the executor and the judge pipeline."""

from __future__ import annotations

from pathlib import Path

MEDIA_KINDS = ("text", "image", "video", "document", "web", "data", "other")

_EXTENSION_MAP = {
    ".txt": "text",
    ".md": "text",
    ".rst": "text",
    ".log": "text",
    ".py": "text",
    ".js": "text",
    ".ts": "text",
    ".tex": "text",
    ".svg": "text",
    ".png": "image",
    ".jpg": "image",
    ".jpeg": "image",
    ".webp": "image",
    ".bmp": "image",
    ".mp4": "video",
    ".mov": "video",
    ".avi": "video",
    ".webm": "video",
    ".gif": "video",
    ".pdf": "document",
    ".docx": "document",
    ".pptx": "document",
    ".odt": "document",
    ".html": "web",
    ".htm": "web",
    ".csv": "data",
    ".tsv": "data",
    ".json": "data",
    ".jsonl": "data",
    ".yaml": "data",
    ".yml": "data",
    ".parquet": "data",
    ".xlsx": "data",
}


def media_kind(path: str | Path) -> str:
    return _EXTENSION_MAP.get(Path(path).suffix.lower(), "other")
