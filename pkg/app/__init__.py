# Analytic Besov functional calculus engine
__version__ = "0.1.0"
