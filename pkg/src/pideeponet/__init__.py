"""Physics-informed DeepONet for traffic state estimation."""
