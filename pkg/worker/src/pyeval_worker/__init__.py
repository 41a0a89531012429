"""Reference evaluation worker for the adversarial refinement engine."""

__version__ = "0.1.0"
