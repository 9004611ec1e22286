"""Joint DoA, block-fading and RF-fingerprint estimation toolkit.

Synthesizes hardware-impaired multi-device uplink signals over a multipath
array channel and recovers directions of arrival, fading gains and device
fingerprints via regularized PARAFAC alternating least squares, with KRF/LS
baselines and Cramer-Rao lower bounds.
"""

__version__ = "0.1.0"
