"""Heat-kernel estimates for stable processes with critical killing on sets with singular boundary pieces."""
__version__ = "0.1.0"
