"""chaosavg: desk-scale verification bench for averaged Gaussian functionals.

Library layout
--------------
``kernels``       covariance/spectral catalog, Bessel machinery, temporal kernels
``field``         stationary Gaussian field samplers (circulant, spectral)
``functionals``   Hermite series, discrete chaos kernels, contraction calculus
``breuer_major``  spatial-average experiments and limiting-variance evaluators
``she``           stochastic-heat-equation covariances, Feynman-Kac Monte Carlo
``stats``         ensemble statistics (KS, moments, power-law fits)
``cli``           experiment runner with JSON configs and CSV/JSON outputs
"""

__version__ = "0.1.0"
