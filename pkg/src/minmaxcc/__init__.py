"""(3+ε)-approximate min-max correlation clustering."""
