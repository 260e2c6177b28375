"""Joint functional calculus of sub-Laplacians on 2-step stratified groups."""
__version__ = "0.1.0"
