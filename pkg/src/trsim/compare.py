"""Side-by-side TR and VPN runs over the same scenario."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .engine import MetricsReport, run
from .scenario import Scenario


@dataclass
class ComparisonReport:
    tr: MetricsReport
    vpn: MetricsReport
    notices: list[str] = field(default_factory=list)

    @property
    def deltas(self) -> dict:
        return {
            "exposure_difference": self.vpn.total_exposures - self.tr.total_exposures,
            "delivery_difference": self.vpn.packets_delivered - self.tr.packets_delivered,
            "tr_detections": len(self.tr.detections),
            "vpn_detections": len(self.vpn.detections),
        }

    def to_dict(self) -> dict:
        return {
            "tr": self.tr.to_dict(),
            "vpn": self.vpn.to_dict(),
            "deltas": self.deltas,
            "notices": list(self.notices),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def compare(scenario: Scenario, seed: int | None = None) -> ComparisonReport:
    tr_scenario, tr_notices = scenario.with_mode("tr")
    vpn_scenario, vpn_notices = scenario.with_mode("vpn")
    with ThreadPoolExecutor(max_workers=2) as pool:
        tr_future = pool.submit(run, tr_scenario, seed)
        vpn_future = pool.submit(run, vpn_scenario, seed)
        return ComparisonReport(tr_future.result(), vpn_future.result(), tr_notices + vpn_notices)
