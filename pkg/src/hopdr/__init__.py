"""Backwards reachability analysis for higher-order alternating pushdown systems."""
