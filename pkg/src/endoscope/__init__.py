"""Verification toolkit for a semilocal elliptic-term/Poisson-dual trace identity.

Layered bottom-up:

    sarith      exact arithmetic over R x Q_{q_1} x ... x Q_{q_r}
    quadratic   discriminants, Kronecker symbols, class-number L(1) oracle
    specfun     Gamma/zeta wrappers, K_s(2), the smoothing pair (F, F~), V-kernels
    zagier      partial Zagier L-series: direct sums, functional equation, AFE
    orbital     local orbital integrals (closed forms + lattice oracle), theta data
    kloosterman semilocal Kloosterman sums and their Dirichlet series
    elliptic    the assembled identity: direct sum, Poisson dual, spectral traces
    cli         TOML-configured command line with JSON run manifests
"""

__version__ = "0.1.0"
