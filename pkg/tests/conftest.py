import numpy as np
import pytest

from tridigit.fourbar import Branch, TridigitalGeometry, select_branch


def variplus_geometry() -> TridigitalGeometry:
    """The shipped sample geometry (measured values, positive branch)."""
    return TridigitalGeometry(75.0, 52.0, 14.0, 13.0, 40.0, 43.8, 8.0, 180.0,
                              Branch.POSITIVE)


@pytest.fixture
def variplus() -> TridigitalGeometry:
    return variplus_geometry()


def random_feasible_geometry(rng: np.random.Generator) -> TridigitalGeometry:
    """Draw a geometry that closes somewhere; used by property tests."""
    while True:
        l_f = rng.uniform(40.0, 120.0)
        l_th = rng.uniform(30.0, 80.0)
        l_1 = rng.uniform(8.0, 20.0)
        l_2 = rng.uniform(8.0, 20.0)
        d_ab = rng.uniform(25.0, 60.0)
        alpha = rng.uniform(-30.0, 30.0)
        beta = rng.uniform(150.0, 210.0)
        # the rod must span the attachment-point gap for at least some angle
        lo, hi = abs(d_ab - l_1) - l_2, d_ab + l_1 + l_2
        l_r = rng.uniform(max(lo, 5.0) + 1.0, hi - 1.0)
        geom = TridigitalGeometry(l_f, l_th, l_1, l_2, l_r, d_ab, alpha, beta)
        grid = np.arange(-180.0, 180.0, 1.0)
        if np.count_nonzero(geom.assemblable(grid)) >= 30:
            try:
                branch = select_branch(geom, scan_step_deg=1.0)
            except Exception:
                continue
            return TridigitalGeometry(l_f, l_th, l_1, l_2, l_r, d_ab, alpha,
                                      beta, branch)


def feasible_angles(geom: TridigitalGeometry, rng: np.random.Generator,
                    count: int, margin_deg: float = 3.0) -> np.ndarray:
    """Finger angles safely inside the assemblable range."""
    grid = np.arange(-180.0, 180.0, 0.5)
    ok = geom.assemblable(grid)
    # keep angles whose neighborhood is also assemblable (away from folds)
    k = int(margin_deg / 0.5)
    good = ok.copy()
    for shift in range(1, k + 1):
        good &= np.roll(ok, shift) & np.roll(ok, -shift)
    candidates = grid[good]
    return rng.choice(candidates, size=count, replace=True)
