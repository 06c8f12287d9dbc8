"""Exitmap Modules - First maps, planar analysis, realization and hybrid systems."""
