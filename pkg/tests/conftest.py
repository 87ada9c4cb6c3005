import os
from pathlib import Path

import pytest

from laminate_orbits import persist
from laminate_orbits.seed import build_seed_orbit


def _cached_orbit(request, name, build):
    """Build once, then reuse the JSON copy kept in pytest's cache directory."""
    if os.environ.get("LAMINATE_NO_CACHE"):
        return build()
    path = Path(request.config.cache.mkdir("laminate_orbits")) / f"{name}.json"
    if path.exists():
        return persist.load_orbit(path)
    orbit = build()
    persist.save_orbit(path, orbit)
    return orbit


@pytest.fixture(scope="session")
def seed_orbit(request):
    """Converged orbit at eps = 1e-3 near the double-heteroclinic level."""
    return _cached_orbit(request, "seed_1e-3", lambda: build_seed_orbit(1e-3))
