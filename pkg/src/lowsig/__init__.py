"""Low-signal correction of CT photon-count sinograms."""
__version__ = "0.1.0"
