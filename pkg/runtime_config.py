import os

# Worker processes for the replications of a finite-N run
workers = max(1, int(os.environ.get("LBMF_THREADS", os.cpu_count() or 1)))

log_level = os.environ.get("LBMF_LOG_LEVEL", "WARNING").upper()

# Stationary reports memoized per process
cache_threshold = int(os.environ.get("LBMF_CACHE_THRESHOLD", 200))
