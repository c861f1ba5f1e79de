"""Scenario builders and the seeded random scenario suite."""

from __future__ import annotations

import json
import random

from trsim.scenario import Scenario, load_scenario

DEFAULT_CONFIG = {
    "mode": "tr",
    "poll_period": 2,
    "rotation_period": 5,
    "labels_per_node": 3,
    "zombify": {"enabled": False, "delay_ticks": 0},
    "require_full_mesh": False,
    "excluded_locations": [],
    "seed": 0,
    "max_ticks": 200,
    "session_key": 7,
}


def scenario_dict(
    links,
    trust: dict | None = None,
    zombifiable=(),
    locations: dict | None = None,
    traffic=(),
    events=(),
    ids: str | None = None,
    **config,
) -> dict:
    """Build scenario JSON. ``links`` are "A-B" strings or (a, b, latency) tuples."""
    trust = trust or {}
    locations = locations or {}
    parsed = []
    names: list[str] = []
    for link in links:
        a, b, lat = (*link.split("-"), 1) if isinstance(link, str) else link
        parsed.append({"a": a, "b": b, "latency_ticks": lat})
        names += [a, b]
    names += list(trust)
    order = sorted(set(names))
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    for k, v in config.items():
        if k == "zombify_enabled":
            cfg["zombify"]["enabled"] = v
        elif k == "zombify_delay":
            cfg["zombify"]["delay_ticks"] = v
        else:
            cfg[k] = v
    out = {
        "config": cfg,
        "nodes": [
            {"id": n, "as": f"as-{n}", "location": locations.get(n, "here"),
             "trust": trust.get(n, "trusted"), "zombifiable": n in zombifiable}
            for n in order
        ],
        "links": parsed,
        "traffic": [dict({"start_tick": 0, "encrypted": True}, **t) for t in traffic],
        "events": list(events),
    }
    if ids is not None:
        out["ids"] = ids
    return out


def make_scenario(links, **kwargs) -> Scenario:
    return load_scenario(json.dumps(scenario_dict(links, **kwargs)))


def random_scenario_dict(rng: random.Random, *, event_kinds=("tamper_rt", "tamper_label")) -> dict:
    """A connected random network with traffic and adversary events of ``event_kinds``."""
    n = rng.randint(5, 12)
    names = [f"r{i:02d}" for i in range(n)]
    links = set()
    for i in range(1, n):
        j = rng.randrange(i)
        links.add((names[j], names[i]))
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.sample(names, 2)
        if (b, a) not in links:
            links.add((a, b))
    links = sorted(links)
    trust = {m: ("trusted" if rng.random() < 0.7 else "untrusted") for m in names}
    zomb = {m for m in names if rng.random() < 0.5}
    locations = {m: rng.choice(["eu", "us", "asia", "xland"]) for m in names}
    excluded = ["xland"] if rng.random() < 0.3 else []
    traffic = []
    for _ in range(rng.randint(1, 3)):
        s, d = rng.sample(names, 2)
        traffic.append({"src": s, "dst": d, "packets": rng.randint(5, 25),
                        "start_tick": rng.randint(0, 20), "encrypted": rng.random() < 0.5})
    adj = {m: [] for m in names}
    for a, b in links:
        adj[a].append(b)
        adj[b].append(a)
    events = []
    labels = rng.randint(1, 4)
    for _ in range(rng.randint(0, 4)):
        kind = rng.choice(event_kinds)
        node = rng.choice(names)
        tick = rng.randint(0, 60)
        if kind == "tamper_rt":
            dest = rng.choice([m for m in names if m != node])
            events.append({"tick": tick, "kind": kind, "node": node, "destination": dest,
                           "new_next_hop": rng.choice(adj[node])})
        elif kind == "tamper_label":
            events.append({"tick": tick, "kind": kind, "node": node, "index": rng.randrange(labels),
                           "new_value": rng.getrandbits(64)})
        else:
            events.append({"tick": tick, "kind": kind, "node": node})
    events.sort(key=lambda e: e["tick"])
    return scenario_dict(
        [(a, b, rng.randint(1, 3)) for a, b in links],
        trust=trust,
        zombifiable=zomb,
        locations=locations,
        traffic=traffic,
        events=events,
        poll_period=rng.randint(1, 5),
        rotation_period=rng.randint(1, 20),
        labels_per_node=labels,
        zombify_enabled=rng.random() < 0.6,
        zombify_delay=rng.randint(0, 3),
        excluded_locations=excluded,
        seed=rng.getrandbits(32),
        max_ticks=2000,
        session_key=rng.getrandbits(64),
    )


def random_suite(count: int = 120, seed: int = 20261015, **kwargs) -> list[str]:
    rng = random.Random(seed)
    return [json.dumps(random_scenario_dict(rng, **kwargs), indent=2) for _ in range(count)]


def active_route_tamper_suite(count: int = 150, seed: int = 303) -> list[str]:
    """Random scenarios whose routing-table tampering lands on a session's route while it is transferring.

    Each base scenario is run once without an adversary to learn where and when
    routes are active; tamper events are then aimed inside those windows.
    """
    from trsim.engine import Simulation

    rng = random.Random(seed)
    out = []
    while len(out) < count:
        d = random_scenario_dict(rng)
        d["events"] = []
        sim = Simulation(load_scenario(json.dumps(d)))
        sim.run()
        windows = [(iv.path, iv.start, iv.end) for f in sim.flows for iv in f.intervals
                   if iv.end is not None and iv.end - iv.start >= 2]
        if not windows:
            continue
        adj: dict[str, list[str]] = {}
        for link in d["links"]:
            adj.setdefault(link["a"], []).append(link["b"])
            adj.setdefault(link["b"], []).append(link["a"])
        events = []
        for _ in range(rng.randint(1, 3)):
            path, start, end = rng.choice(windows)
            node = rng.choice(path[:-1])
            dest = path[-1] if rng.random() < 0.7 else rng.choice([n for n in adj if n != node])
            events.append({"tick": rng.randint(start + 1, end - 1), "kind": "tamper_rt", "node": node,
                           "destination": dest, "new_next_hop": rng.choice(sorted(adj[node]))})
        d["events"] = sorted(events, key=lambda e: e["tick"])
        out.append(json.dumps(d, indent=2))
    return out
