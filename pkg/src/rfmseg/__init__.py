"""RFM features and customer segmentation from card transaction logs."""
__version__ = "0.1.0"
