"""mmWave multipath SLAM: PMBM map filter with a diffuse-multipath cluster likelihood."""

__version__ = "1.0.0"
