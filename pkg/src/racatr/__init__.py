"""Design and analysis of a reflectarray compact antenna test range."""

__version__ = "0.1.0"
