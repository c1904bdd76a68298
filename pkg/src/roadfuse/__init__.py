"""roadfuse: deterministic roadside multi-sensor fusion testbed."""

__version__ = "0.1.0"
