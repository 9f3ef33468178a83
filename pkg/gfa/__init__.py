"""
Generalized Factor Analysis toolkit

Detects, extracts and validates the aggregate (flocking) component and the
idiosyncratic residual of large cross-section random sequences, stationary
series and separable space-time fields.
"""
__version__ = "0.1.0"
