#!/usr/bin/env python3
"""
Upload mmslam run results to Google Cloud Storage.

Walks a local results directory, checks that every run folder is complete
(steps.csv and summary.json, with the CSV hash recorded in the summary) and
copies the files to a bucket below a prefix, keeping the folder layout.

Usage:
    python upload_to_gcs.py --bucket BUCKET_NAME [--results-dir DIR] [--prefix PREFIX] [--dry-run]

Requirements:
    pip install -r requirements-upload.txt
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Tuple

try:
    from google.cloud import storage
    from google.api_core import exceptions
except ImportError:
    print("Error: google-cloud-storage is not installed.")
    print("Install it with: pip install google-cloud-storage")
    sys.exit(1)

from mmslam.utils.hashing import get_content_hasher


CONTENT_TYPES = {
    ".csv": "text/csv",
    ".json": "application/json",
    ".jsonl": "application/x-ndjson",
}


class ResultsUploader:
    """Uploads the steps.csv / summary.json folders written by `python -m mmslam run`."""

    def __init__(self, bucket_name: str, results_dir: str = "results", prefix: str = "mmslam"):
        """
        Initialize the uploader.

        Args:
            bucket_name: Name of the GCS bucket
            results_dir: Local results directory (default: "results")
            prefix: Object prefix inside the bucket (default: "mmslam")
        """
        self.bucket_name = bucket_name
        self.results_dir = Path(results_dir)
        self.prefix = prefix.strip("/")
        self.client = storage.Client()
        self.bucket = self.client.bucket(bucket_name)
        self.hasher = get_content_hasher()

    def destination(self, relative_path: str) -> str:
        return f"{self.prefix}/{relative_path}" if self.prefix else relative_path

    def find_files(self) -> List[Tuple[Path, str]]:
        """
        List result files with their destination object names.

        Returns:
            List of tuples (local_file_path, object_name)
        """
        if not self.results_dir.exists():
            raise FileNotFoundError(f"Results directory {self.results_dir} does not exist")

        files = []
        for root, _, names in os.walk(self.results_dir):
            for name in sorted(names):
                local_path = Path(root) / name
                if local_path.suffix.lower() not in CONTENT_TYPES:
                    continue
                relative = str(local_path.relative_to(self.results_dir)).replace(os.sep, "/")
                files.append((local_path, self.destination(relative)))
        return sorted(files, key=lambda item: item[1])

    def check_run_folder(self, summary_path: Path) -> bool:
        """
        Check a run folder: its steps.csv must exist and match the hash in summary.json.

        Returns:
            True if the folder is consistent
        """
        steps_path = summary_path.parent / "steps.csv"
        try:
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            print(f"✗ Unreadable summary {summary_path}: {str(e)}")
            return False
        if not steps_path.exists():
            print(f"✗ {summary_path.parent} has summary.json but no steps.csv")
            return False

        expected = summary.get("csv_sha256")
        actual = self.hasher.generate_hash(steps_path.read_bytes().decode("utf-8"))
        if self.hasher.has_content_changed(expected, actual):
            print(f"✗ {steps_path} does not match the hash recorded in {summary_path.name}")
            return False
        return True

    def upload_file(self, local_path: Path, object_name: str, dry_run: bool = False) -> bool:
        """
        Upload a single result file.

        Returns:
            True if successful (or dry run), False if failed
        """
        content_type = CONTENT_TYPES[local_path.suffix.lower()]
        if dry_run:
            print(f"[DRY RUN] Would upload: {local_path} -> gs://{self.bucket_name}/{object_name}")
            print(f"          Content-Type: {content_type}, Size: {local_path.stat().st_size} bytes")
            return True

        try:
            blob = self.bucket.blob(object_name)
            blob.upload_from_filename(str(local_path), content_type=content_type)
            print(f"✓ Uploaded: {local_path} -> gs://{self.bucket_name}/{object_name}")
            return True
        except Exception as e:
            print(f"✗ Failed to upload {local_path}: {str(e)}")
            return False

    def verify_bucket_access(self) -> bool:
        try:
            self.bucket.reload()
            print(f"✓ Bucket gs://{self.bucket_name} is accessible")
            return True
        except exceptions.NotFound:
            print(f"✗ Bucket gs://{self.bucket_name} does not exist")
            return False
        except exceptions.Forbidden:
            print(f"✗ Access denied to bucket gs://{self.bucket_name}")
            return False
        except Exception as e:
            print(f"✗ Error accessing bucket gs://{self.bucket_name}: {str(e)}")
            return False

    def upload_all(self, dry_run: bool = False) -> bool:
        """
        Check every run folder, then upload all result files.

        Returns:
            True if all folders are consistent and all uploads succeed
        """
        try:
            files = self.find_files()
        except FileNotFoundError as e:
            print(f"✗ {str(e)}")
            return False

        if not files:
            print(f"No result files found in {self.results_dir}")
            return True

        summaries = [path for path, _ in files if path.name == "summary.json"]
        inconsistent = [path for path in summaries if not self.check_run_folder(path)]
        if inconsistent:
            print(f"\n{len(inconsistent)} run folder(s) failed the consistency check; nothing uploaded")
            return False

        if not dry_run and not self.verify_bucket_access():
            return False

        print(f"\nFound {len(files)} files in {len(summaries)} run folder(s)")
        if dry_run:
            print("Running in DRY RUN mode - no actual uploads will be performed\n")

        success_count = sum(self.upload_file(path, name, dry_run) for path, name in files)

        print("\nUpload summary:")
        print(f"  Total files: {len(files)}")
        print(f"  Successful: {success_count}")
        print(f"  Failed: {len(files) - success_count}")
        return success_count == len(files)


def main():
    """Main function."""
    parser = argparse.ArgumentParser(
        description="Upload mmslam run results to Google Cloud Storage",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python upload_to_gcs.py --bucket my-slam-results
  python upload_to_gcs.py --bucket my-slam-results --results-dir ./results --dry-run
  python upload_to_gcs.py --bucket my-slam-results --prefix experiments/2026-10

Note:
  - Make sure you're authenticated with gcloud: gcloud auth application-default login
  - The bucket must already exist and you must have write permissions
        """
    )
    parser.add_argument("--bucket", required=True, help="Google Cloud Storage bucket name")
    parser.add_argument("--results-dir", default="results", help="Local results directory (default: results)")
    parser.add_argument("--prefix", default="mmslam", help="Object prefix in the bucket (default: mmslam)")
    parser.add_argument("--dry-run", action="store_true", help="Show what would be uploaded without uploading")
    args = parser.parse_args()

    print("mmslam results uploader")
    print("=" * 40)
    print(f"Source directory: {args.results_dir}")
    print(f"Target: gs://{args.bucket}/{args.prefix.strip('/')}")
    print(f"Dry run: {args.dry_run}")
    print()

    try:
        uploader = ResultsUploader(args.bucket, args.results_dir, args.prefix)
        sys.exit(0 if uploader.upload_all(dry_run=args.dry_run) else 1)
    except KeyboardInterrupt:
        print("\n\nUpload interrupted by user")
        sys.exit(130)
    except Exception as e:
        print(f"\n✗ Unexpected error: {str(e)}")
        sys.exit(1)


if __name__ == "__main__":
    main()
