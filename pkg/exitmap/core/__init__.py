"""Exitmap Core - Flows, homeomorphisms and regions."""
