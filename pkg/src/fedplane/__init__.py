"""fedplane: a desk-scale control plane for a federation of simulated
clusters — project placement, GPU booking with admission and expiry,
health monitoring, and release synchronization."""

__version__ = "0.1.0"
