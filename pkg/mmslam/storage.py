"""
Result storage for mmslam runs.
Writes run artifacts (step CSV, summary JSON, scan dumps) to the local filesystem or a Google Cloud Storage bucket.
"""

import os
import logging
from pathlib import Path
from typing import Dict, Optional, Protocol

# Google Cloud Storage imports (optional for local mode)
try:
    from google.cloud import storage
    GCS_AVAILABLE = True
except ImportError:
    GCS_AVAILABLE = False
    storage = None


logger = logging.getLogger(__name__)


class StorageInterface(Protocol):
    """Protocol defining the storage interface for both cloud and local implementations."""

    def upload_file(self, file_path: str, content: str, content_type: str = "text/plain") -> bool:
        """Upload a file with the given content."""
        ...

    def location(self, file_path: str) -> str:
        """Human-readable location of a stored file."""
        ...

    def store_run_outputs(self, files: Dict[str, str]) -> Dict[str, str]:
        """
        Store the artifacts of one run.

        Args:
            files: mapping of relative file name to content

        Returns:
            Dict mapping each stored file name to its location; failed files are omitted
        """
        ...


def _content_type(file_path: str) -> str:
    if file_path.endswith(".json"):
        return "application/json"
    if file_path.endswith(".csv"):
        return "text/csv"
    if file_path.endswith(".jsonl"):
        return "application/x-ndjson"
    return "text/plain"


class CloudStorage:
    """
    Cloud Storage client for run artifacts.

    Storage Layout:
    - <prefix>/<file name> (steps.csv, summary.json, comparison.json, scans.jsonl)
    """

    def __init__(self, bucket_name: str, prefix: str = ""):
        """Initialize Cloud Storage client with bucket name and object prefix."""
        if not GCS_AVAILABLE:
            raise ImportError(
                "Google Cloud Storage is not available. Install with: pip install google-cloud-storage"
            )

        self.bucket_name = bucket_name
        self.prefix = prefix.strip("/")
        self.client = storage.Client()
        self.bucket = self.client.bucket(bucket_name)

    def _blob_name(self, file_path: str) -> str:
        return f"{self.prefix}/{file_path}" if self.prefix else file_path

    def location(self, file_path: str) -> str:
        return f"gs://{self.bucket_name}/{self._blob_name(file_path)}"

    def upload_file(self, file_path: str, content: str, content_type: str = "text/plain") -> bool:
        """
        Upload a file to Cloud Storage.

        Args:
            file_path: Path of the file below the prefix
            content: The content to upload
            content_type: MIME type of the content

        Returns:
            bool: True if upload successful, False otherwise
        """
        try:
            blob = self.bucket.blob(self._blob_name(file_path))
            blob.upload_from_string(content, content_type=content_type)
            logger.info(f"Successfully uploaded {file_path} to {self.bucket_name}")
            return True
        except Exception as e:
            logger.error(f"Failed to upload {file_path}: {str(e)}")
            return False

    def store_run_outputs(self, files: Dict[str, str]) -> Dict[str, str]:
        stored = {}
        for name, content in files.items():
            if self.upload_file(name, content, _content_type(name)):
                stored[name] = self.location(name)
        return stored


class LocalStorage:
    """
    Local file system storage for run artifacts.

    Storage Layout:
    - <base_path>/<file name> (steps.csv, summary.json, comparison.json, scans.jsonl)
    """

    def __init__(self, base_path: str = "./results"):
        """Initialize Local Storage with base directory path."""
        self.base_path = Path(base_path)
        self.base_path.mkdir(parents=True, exist_ok=True)

    def _get_full_path(self, file_path: str) -> Path:
        """Get the full filesystem path for a given file path."""
        return self.base_path / file_path

    def location(self, file_path: str) -> str:
        return str(self._get_full_path(file_path))

    def upload_file(self, file_path: str, content: str, content_type: str = "text/plain") -> bool:
        """
        Save a file to local filesystem.

        Args:
            file_path: The relative path where to store the file
            content: The content to save
            content_type: MIME type of the content (ignored for local storage)

        Returns:
            bool: True if save successful, False otherwise
        """
        try:
            full_path = self._get_full_path(file_path)
            full_path.parent.mkdir(parents=True, exist_ok=True)
            # newline="" keeps the bytes identical across platforms
            with open(full_path, "w", encoding="utf-8", newline="") as handle:
                handle.write(content)
            logger.info(f"Successfully saved {file_path} to local storage")
            return True
        except Exception as e:
            logger.error(f"Failed to save {file_path}: {str(e)}")
            return False

    def store_run_outputs(self, files: Dict[str, str]) -> Dict[str, str]:
        stored = {}
        for name, content in files.items():
            if self.upload_file(name, content, _content_type(name)):
                stored[name] = self.location(name)
        return stored


def get_storage_client(local_path: Optional[str] = None) -> StorageInterface:
    """
    Get a configured storage client instance.

    Supports both local and cloud storage modes:
    - Local mode (default): STORAGE_MODE=local, directory from local_path or LOCAL_STORAGE_PATH
    - Cloud mode: STORAGE_MODE=cloud with STORAGE_BUCKET and optional MMSLAM_RESULTS_PREFIX

    Args:
        local_path: Output directory overriding LOCAL_STORAGE_PATH in local mode

    Returns:
        StorageInterface: Configured storage client (LocalStorage or CloudStorage)
    """
    storage_mode = os.getenv("STORAGE_MODE", "local").lower()

    if storage_mode == "local":
        path = local_path or os.getenv("LOCAL_STORAGE_PATH", "./results")
        logger.info(f"Using local storage mode with path: {path}")
        return LocalStorage(path)

    elif storage_mode == "cloud":
        if not GCS_AVAILABLE:
            raise ImportError(
                "Google Cloud Storage is not available. Install with: pip install google-cloud-storage "
                "or switch to local mode with STORAGE_MODE=local"
            )

        bucket_name = os.getenv("STORAGE_BUCKET")
        if not bucket_name:
            raise ValueError("STORAGE_BUCKET environment variable is required for cloud mode")

        prefix = os.getenv("MMSLAM_RESULTS_PREFIX", "mmslam")
        if local_path:
            prefix = f"{prefix}/{Path(local_path).name}"
        logger.info(f"Using cloud storage mode with bucket: {bucket_name}, prefix: {prefix}")
        return CloudStorage(bucket_name, prefix)

    else:
        raise ValueError(
            f"Invalid STORAGE_MODE '{storage_mode}'. Must be 'local' or 'cloud'"
        )
