"""Checksum manifests written next to every artifact."""
import hashlib
import json
import platform
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import scipy

import CoalescentLab


class ManifestWriter:
    """Records config, library versions, wall time and artifact checksums."""

    def __init__(self, command: str, config: Dict[str, Any]):
        self.command = command
        self.config = config
        self.artifacts: List[Path] = []

    @staticmethod
    def calculate_checksum(file_path: Path) -> str:
        """Calculate SHA256 checksum of a file."""
        sha256 = hashlib.sha256()
        with open(file_path, 'rb') as f:
            for chunk in iter(lambda: f.read(65536), b''):
                sha256.update(chunk)
        return sha256.hexdigest()

    def add(self, path: Path):
        self.artifacts.append(Path(path))

    def build(self, wall_time: float) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'versions': {
                'CoalescentLab': CoalescentLab.__version__,
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'python': platform.python_version(),
            },
            'wall_time_seconds': wall_time,
            'artifacts': {
                path.name: {
                    'sha256': self.calculate_checksum(path),
                    'size': path.stat().st_size,
                }
                for path in self.artifacts
            },
        }

    def write(self, stem_path: Path, wall_time: float) -> Path:
        """Write ``<stem>.manifest.json`` beside the primary artifact."""
        stem_path = Path(stem_path)
        manifest_path = stem_path.with_name(stem_path.stem + '.manifest.json')
        with open(manifest_path, 'w', encoding='utf-8') as f:
            json.dump(self.build(wall_time), f, indent=2, sort_keys=True)
            f.write('\n')
        return manifest_path
