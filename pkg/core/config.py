"""
core/config.py
Numerical and runtime configuration for WAMP.

All settings can be overridden via environment variables or by editing the
values directly in this file.  Environment variables take precedence, and
command-line flags take precedence over both.

Example (Linux/macOS):
    WAMP_WORKERS=4 WAMP_QUIET=1 python ui/cli.py sweep --n 3,4 --simulate

Example (Windows PowerShell):
    $env:WAMP_WORKERS="4"; python ui/cli.py verify
"""

import os

# ---------------------------------------------------------------------------
# Sparse state engine
# ---------------------------------------------------------------------------

# Amplitudes whose magnitude falls below this are dropped after every element.
# Protocol amplitudes are products of sqrt(t), sqrt(1-t) and 1/2 factors and
# stay far above it on the clamped sweep grid.
PRUNE_THRESHOLD = float(os.environ.get("WAMP_PRUNE", "1e-14"))

# Per-mode occupancy cap.  The amplifier never puts more than two photons in a
# mode, so hitting the cap means a wiring bug.
MAX_OCCUPANCY = int(os.environ.get("WAMP_MAX_OCCUPANCY", "4"))

# Unitarity and norm-preservation tolerance for element applications
UNITARY_TOLERANCE = 1e-12

# Normalisation tolerance for TimeBinQubit amplitudes
QUBIT_NORM_TOLERANCE = 1e-9

# ---------------------------------------------------------------------------
# Verification tolerances
# ---------------------------------------------------------------------------

# analytic vs simulated agreement (simulate / sweep / verify)
TOLERANCE = float(os.environ.get("WAMP_TOLERANCE", "1e-9"))

# per-pattern uniformity, post-correction fidelity, completeness
STRICT_TOLERANCE = float(os.environ.get("WAMP_STRICT_TOLERANCE", "1e-10"))

# Largest party count the verify command simulates by default
VERIFY_MAX_N = int(os.environ.get("WAMP_MAX_N", "5"))

# Checks run by `verify`.  Empty / unset means every registered check.
_checks_raw = os.environ.get("WAMP_ENABLED_CHECKS", "").split(",")
ENABLED_CHECKS = []
for _check in _checks_raw:
    _clean = _check.strip().lower()
    if _clean:
        ENABLED_CHECKS.append(_clean)

# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

# Worker processes for simulated sweep points.  1 runs inline.
WORKERS = int(os.environ.get("WAMP_WORKERS", "1"))

# Grids are clamped into [T_CLAMP, 1 - T_CLAMP]; the endpoints are reported
# through one-sided analytic limits instead.
T_CLAMP = 1e-3

# Reference point used to classify the phase-flip correction of every pattern.
# Any interior t and any alpha/beta with both amplitudes nonzero works.
REFERENCE_T = 0.3
REFERENCE_ALPHA = complex(os.environ.get("WAMP_REFERENCE_ALPHA", "0.6"))
REFERENCE_BETA = complex(os.environ.get("WAMP_REFERENCE_BETA", "0.8j"))

# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

LOG_LEVEL = os.environ.get("WAMP_LOG_LEVEL", "INFO").strip().upper() or "INFO"

# quiet_mode: only warnings and errors reach stderr
QUIET_MODE = os.environ.get("WAMP_QUIET", "0").lower() in ("1", "true", "yes")

if QUIET_MODE:
    LOG_LEVEL = "WARNING"
