"""
Content hashing utility for mmslam.
Digests of emitted run outputs so determinism can be checked across runs.
"""

import hashlib
import logging


logger = logging.getLogger(__name__)


class ContentHasher:
    """
    Content hasher for run artifacts.
    Digests are taken over the exact UTF-8 bytes; no normalization is applied.
    """

    def __init__(self):
        """Initialize content hasher."""
        self.hash_algorithm = hashlib.sha256

    def generate_hash(self, content: str) -> str:
        """
        Generate a hash for content.

        Args:
            content: Content to hash

        Returns:
            str: Hexadecimal hash string
        """
        hash_hex = self.hash_algorithm(content.encode("utf-8")).hexdigest()
        logger.debug(f"Generated hash: {hash_hex[:16]}... for {len(content)} chars")
        return hash_hex

    def has_content_changed(self, old_hash: str, new_hash: str) -> bool:
        """
        Check if content has changed based on hash comparison.

        Args:
            old_hash: Previous hash
            new_hash: Current hash

        Returns:
            bool: True if content has changed, False otherwise
        """
        if not old_hash or not new_hash:
            return True

        changed = old_hash != new_hash
        if changed:
            logger.info(f"Content change detected: {old_hash[:16]}... → {new_hash[:16]}...")
        else:
            logger.debug(f"No content change: {old_hash[:16]}...")
        return changed


def get_content_hasher() -> ContentHasher:
    """
    Get a configured content hasher instance.

    Returns:
        ContentHasher: Configured content hasher
    """
    return ContentHasher()
