"""Numerical tolerances shared across the package."""

# SpdMatrix construction
SYMMETRY_RTOL = 1e-10
RECONSTRUCTION_RTOL = 1e-8
MAX_CONDITION = 1e12
# fitted scatter above this condition number is flagged in diagnostics
WARN_CONDITION = 1e8

# Shape parameter envelope
BETA_MIN = 0.01
BETA_MAX = 100.0

# Tyler fixed point
TYLER_MAX_ITER = 500
TYLER_TOL = 1e-6
TYLER_MIN_DENOMINATOR = 1e-300

# Spatial median
MEDIAN_TOL = 1e-7
MEDIAN_MAX_ITER = 1000
MEDIAN_DAMPING = 0.5

# Shape estimation
BETA_BOUNDS = (0.05, 10.0)
# Bracket used by the goodness-of-fit test. Below about 0.2 the fitted null
# at m ~ n can mimic heavy-tailed non-MGGD radial laws, which costs power.
TEST_BETA_BOUNDS = (0.2, 10.0)
BETA_TOL = 1e-6
BETA_MAX_ITER = 200

# Bootstrap failure policy
MAX_FAILED_FRACTION = 0.05
