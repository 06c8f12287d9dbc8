"""Exitmap - first-out / first-in maps of planar flows and impacting systems."""
