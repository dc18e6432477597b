"""CNC-SCSG: variance-reduced nonconvex optimization that escapes saddle points."""

__version__ = "1.0.0"
