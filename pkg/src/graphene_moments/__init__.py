"""Semiclassical fluid models for electron transport in graphene."""

__version__ = "0.1.0"
