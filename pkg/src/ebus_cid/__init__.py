"""Charging infrastructure design for battery-electric bus networks."""

__version__ = "0.1.0"
