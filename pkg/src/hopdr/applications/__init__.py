"""Büchi regions, reachability games and alternation-free μ-calculus on top of Pre*."""
