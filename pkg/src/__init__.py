# Stationary measures and critical thresholds of one-dimensional McKean-Vlasov SDEs
__version__ = "0.1.0"
