"""Dataset manifests: a small YAML file describing the CSV files of a dataset.

The manifest records the schema version, the declared slot range, and the md5 checksum
and size of every data file, so a dataset can be verified with nothing but a checksum
utility.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ValidationIssue

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.yaml"
REQUIRED_FILES = ("blocks", "swaps", "bids", "mempool", "candles")
OPTIONAL_FILES = ("ground_truth",)


@dataclass(frozen=True)
class FileEntry:
    path: str
    md5: str
    size: int


@dataclass(frozen=True)
class DatasetManifest:
    """Description of one dataset directory.

    Parameters
    ----------
    first_slot, last_slot : int
        Declared slot range, inclusive; ``last_slot < first_slot`` declares an empty range.
    genesis : int
        UNIX seconds of slot 0.
    files : dict[str, FileEntry]
        Data files keyed by role (``blocks``, ``swaps``, ``bids``, ``mempool``, ``candles``
        and optionally ``ground_truth``), with paths relative to the manifest.
    schema_version : int
        Version of the file layout.
    source : str
        Free-form provenance, e.g. the scenario name.
    """

    first_slot: int
    last_slot: int
    genesis: int
    files: dict[str, FileEntry] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    source: str = ""

    @property
    def slots(self) -> range:
        return range(self.first_slot, self.last_slot + 1)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "source": self.source,
            "genesis": self.genesis,
            "block_range": {"first": self.first_slot, "last": self.last_slot},
            "files": {
                role: {"path": entry.path, "md5": entry.md5, "size": entry.size}
                for role, entry in self.files.items()
            },
        }

    def write(self, directory: Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.write_text(yaml.safe_dump(self.to_dict(), default_flow_style=False, sort_keys=False))
        return path

    @classmethod
    def read(cls, path: Path) -> DatasetManifest:
        """Parse a manifest file (or the manifest inside a dataset directory).

        Raises
        ------
        FileNotFoundError
            If the manifest does not exist.
        ValueError
            If the manifest is malformed.
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        data = yaml.safe_load(path.read_text())
        if not isinstance(data, dict):
            raise ValueError(f"{path}: manifest must be a mapping")
        try:
            block_range = data["block_range"]
            files = {
                str(role): FileEntry(str(entry["path"]), str(entry["md5"]), int(entry["size"]))
                for role, entry in (data.get("files") or {}).items()
            }
            return cls(
                first_slot=int(block_range["first"]),
                last_slot=int(block_range["last"]),
                genesis=int(data["genesis"]),
                files=files,
                schema_version=int(data["schema_version"]),
                source=str(data.get("source", "")),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed manifest ({exc!r})") from exc


def file_entry(path: Path, root: Path) -> FileEntry:
    """Checksum entry for ``path``, recorded relative to ``root``."""
    path = Path(path).resolve()
    return FileEntry(
        path=path.relative_to(Path(root).resolve()).as_posix(),
        md5=md5sum(path),
        size=path.stat().st_size,
    )


def verify(manifest: DatasetManifest, root: Path) -> list[ValidationIssue]:
    """Check schema version, file presence, sizes and checksums against ``root``."""
    issues = []
    if manifest.schema_version != SCHEMA_VERSION:
        issues.append(
            ValidationIssue(
                MANIFEST_NAME,
                None,
                "invariant",
                f"unsupported schema version {manifest.schema_version}",
            )
        )
    for role in REQUIRED_FILES:
        if role not in manifest.files:
            issues.append(ValidationIssue(MANIFEST_NAME, None, "missing", f"no {role} file listed"))
    for entry in manifest.files.values():
        path = Path(root) / entry.path
        if not path.is_file():
            issues.append(ValidationIssue(entry.path, None, "missing", "file not found"))
        elif path.stat().st_size != entry.size or md5sum(path) != entry.md5:
            issues.append(
                ValidationIssue(entry.path, None, "checksum", "md5 or size differs from manifest")
            )
    return issues


def md5sum(path: Path, chunk_size: int = 65536) -> str:
    h = hashlib.md5()
    with open(path, "rb") as f:
        while chunk := f.read(chunk_size):
            h.update(chunk)
    return h.hexdigest()
