import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", max_examples=60, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

ORACLES = Path(__file__).parent / "oracles"
sys.path.insert(0, str(ORACLES))
