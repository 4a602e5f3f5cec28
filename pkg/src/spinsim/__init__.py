"""Device-to-network simulator for spintronic UNet hardware."""

__version__ = "0.1.0"
