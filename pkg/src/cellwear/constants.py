"""Physical constants (SI units)."""

FARADAY = 96485.33212  # C/mol
GAS_CONSTANT = 8.314462618  # J/(mol K)
SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0
