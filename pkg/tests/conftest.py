from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
SAVANNA_DIR = REPO_ROOT / "experiments" / "savanna"


@pytest.fixture(scope="session")
def savanna_dir() -> Path:
    return SAVANNA_DIR


@pytest.fixture(scope="session")
def t_table() -> dict[tuple[float, int], float]:
    """High-precision tabulated Student-t quantiles, independent of the package
    implementation (mpmath incomplete beta + root finding)."""
    import mpmath as mp
    from scipy import stats as scipy_stats

    mp.mp.dps = 40

    def quantile(p: float, df: int) -> float:
        pp = mp.mpf(repr(p))

        def cdf(t):
            x = df / (df + t * t)
            tail = mp.betainc(mp.mpf(df) / 2, mp.mpf("0.5"), 0, x, regularized=True) / 2
            return 1 - tail

        def pdf(t):
            return (
                mp.gamma((df + 1) / mp.mpf(2))
                / (mp.sqrt(df * mp.pi) * mp.gamma(df / mp.mpf(2)))
                * (1 + t * t / df) ** (-(df + 1) / mp.mpf(2))
            )

        start = mp.mpf(float(scipy_stats.t.ppf(p, df)))
        return float(mp.findroot(lambda t: cdf(t) - pp, start, df=lambda t: pdf(t)))

    table = {(0.975, df): quantile(0.975, df) for df in range(1, 30)}
    for p, df in [(0.975, 30), (0.975, 99), (0.995, 30), (0.6, 5)]:
        table[(p, df)] = quantile(p, df)
    return table


@pytest.fixture()
def savanna_docs() -> dict[str, str]:
    return {
        name: (SAVANNA_DIR / name).read_text()
        for name in ("layers_services.yaml", "network.yaml", "workflow.yaml")
    }


@pytest.fixture()
def savanna_copy(tmp_path: Path, savanna_docs: dict[str, str]) -> Path:
    """Editable copy of the bundled experiment, dataset included."""
    exp = tmp_path / "savanna"
    exp.mkdir()
    for name, text in savanna_docs.items():
        (exp / name).write_text(text)
    (exp / "dataset").mkdir()
    (exp / "dataset" / "manifest.txt").write_text("placeholder images\n")
    return exp
