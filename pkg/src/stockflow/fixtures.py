"""Generator for the bundled data files.

``python -m stockflow.fixtures [DIR]`` rewrites them; the test suite checks
that the shipped copies match.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .calibrate import QuarterlySeries
from .modelfmt import serialize_scenario
from .oilmarket import (
    FIXTURE_ALPHA_PER_QUARTER,
    FIXTURE_BETA_PER_QUARTER,
    OilMarketParams,
    oil_model_text,
    scenario_a,
    scenario_b,
)

FIRST_YEAR = 2010
QUARTERS = 18  # 2010Q1 .. 2014Q2
FIRST_PRICE = 78.0


def calibration_fixture(alpha: float = FIXTURE_ALPHA_PER_QUARTER, beta: float = FIXTURE_BETA_PER_QUARTER,
                        quarters: int = QUARTERS, first_price: float = FIRST_PRICE) -> QuarterlySeries:
    """Synthetic, noise-free quarterly data obeying P[k+1] - P[k] = alpha * S[k]/D[k] + beta.

    Demand and supply are smooth made-up paths rounded to 0.01; prices are
    generated from the law, so a fit recovers (alpha, beta) up to rounding.
    """
    k = np.arange(quarters)
    demand = np.round(86.8 + 0.35 * k + 0.4 * np.sin(0.9 * k), 2)
    supply = np.round(demand * (1.0 + 0.12 * np.sin(1.3 * k + 0.4)), 2)
    price = np.empty(quarters)
    price[0] = first_price
    for i in range(quarters - 1):
        price[i + 1] = price[i] + (alpha * (supply[i] / demand[i]) + beta)
    labels = tuple(f"{FIRST_YEAR + (i // 4)}Q{i % 4 + 1}" for i in range(quarters))
    return QuarterlySeries(labels, demand, supply, price)


_MODEL_HEADER = """\
# Reconstructed oil market model. The price law coefficients are the
# synthetic calibration fixture (-50 and 51.45 per quarter) converted to
# per-day values; rerun `stockflow calibrate` on real data to replace them.
"""

_SCENARIO_A_HEADER = """\
# Scenario A: neutral market over 43 days. Demand is flat, supply grows
# linearly; the growth rate is the one tune_supply_growth() returns for the
# bundled model (price 100 -> 99.16 at day 43 under RK4, dt = 0.0625).
"""

_SCENARIO_B_HEADER = """\
# Scenario B: a supply upset removes 10% of supply at day 20 and speculation
# discounts expected supply. Producers meet 10 days later; {what}
"""


def fixture_texts() -> dict[str, str]:
    p = OilMarketParams()
    doc_a, _ = scenario_a(p)
    hold, _ = scenario_b(p, 0)
    spare, _ = scenario_b(p, 1)
    return {
        "oilmarket.sfm": _MODEL_HEADER + oil_model_text(p),
        "scenario_a.sfs": _SCENARIO_A_HEADER + serialize_scenario(doc_a),
        "scenario_b_hold.sfs": _SCENARIO_B_HEADER.format(what="they hold output.") + serialize_scenario(hold),
        "scenario_b_spare.sfs": _SCENARIO_B_HEADER.format(
            what="spare capacity equal to the lost\n# volume is ordered for 90 days and arrives after the model's 15-day delay."
        ) + serialize_scenario(spare),
        "calibration_fixture.csv": _quarterly_csv(calibration_fixture()),
    }


def _quarterly_csv(data: QuarterlySeries) -> str:
    lines = ["quarter,demand,supply,price"]
    for q, d, s, pr in zip(data.labels, data.demand, data.supply, data.price):
        lines.append(f"{q},{float(d)!r},{float(s)!r},{float(pr)!r}")
    return "\n".join(lines) + "\n"


def write_fixtures(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in fixture_texts().items():
        path = directory / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data"
    for path in write_fixtures(target):
        print(path)
